from django.apps import AppConfig


class HjlabConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'hjlab'
    verbose_name = 'Hamilton-Jacobi lab'
