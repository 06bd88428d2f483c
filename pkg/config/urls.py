"""
URL configuration for the hjlab project.
"""
from django.urls import path
from hjlab import views

urlpatterns = [
    path('', views.health_check, name='health_check'),
    path('v1/experiments', views.list_experiments, name='list_experiments'),
    path('v1/experiments/<str:experiment_id>/runs', views.create_run, name='create_run'),
    path('v1/runs/<str:run_id>', views.get_run, name='get_run'),
]
