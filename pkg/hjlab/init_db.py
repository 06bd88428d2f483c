import os

from hjlab.database import Base, get_engine, test_connection
from hjlab.sqlalchemy_models import ExperimentRun  # noqa: F401


def create_tables():
    Base.metadata.create_all(bind=get_engine())


if __name__ == "__main__":
    import django

    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'config.settings')
    django.setup()
    print("Testing database connection...")
    if test_connection():
        print("\nCreating database tables...")
        create_tables()
        print("Database tables created successfully!")
    else:
        print("Failed to connect to database. Please check DATABASE_URL in your .env file.")
