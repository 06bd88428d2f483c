from sqlalchemy import create_engine
from sqlalchemy.orm import sessionmaker, declarative_base
from sqlalchemy.pool import StaticPool
from django.conf import settings
from dotenv import load_dotenv
import logging
import os
from urllib.parse import urlparse, urlunparse, parse_qs, urlencode

load_dotenv()

logger = logging.getLogger(__name__)

Base = declarative_base()

_engine = None
_SessionLocal = None


def is_ipv6(address):
    try:
        import ipaddress
        ipaddress.IPv6Address(address)
        return True
    except (ValueError, AttributeError):
        return False


def fix_database_url(url):
    """Route postgres URLs to the psycopg 3 driver and bracket IPv6 hosts."""
    if not url:
        return url

    for prefix in ('postgres://', 'postgresql://'):
        if url.startswith(prefix):
            url = 'postgresql+psycopg://' + url[len(prefix):]
            break

    parsed = urlparse(url)
    try:
        host = parsed.hostname
    except ValueError:
        return url
    if host and is_ipv6(host):
        auth_part = ''
        if parsed.username:
            auth_part = f"{parsed.username}:{parsed.password}@" if parsed.password else f"{parsed.username}@"
        port_part = f":{parsed.port}" if parsed.port else ""
        query_params = parse_qs(parsed.query)
        query_params.setdefault('sslmode', ['require'])
        url = urlunparse((
            parsed.scheme,
            f"{auth_part}[{host}]{port_part}",
            parsed.path,
            parsed.params,
            urlencode(query_params, doseq=True),
            parsed.fragment,
        ))
    return url


def get_database_url():
    url = os.getenv("DATABASE_URL")
    if url:
        return fix_database_url(url)
    return f"sqlite:///{settings.BASE_DIR / 'hjlab.sqlite3'}"


def get_engine():
    global _engine
    if _engine is None:
        _engine = make_engine(get_database_url())
    return _engine


def make_engine(url):
    if url.startswith('sqlite'):
        options = {'connect_args': {'check_same_thread': False}}
        if url in ('sqlite://', 'sqlite:///:memory:'):
            options['poolclass'] = StaticPool
        return create_engine(url, **options)
    return create_engine(
        url,
        pool_pre_ping=True,
        pool_recycle=300,
        pool_size=5,
        max_overflow=10,
    )


def _get_session_factory():
    global _SessionLocal
    if _SessionLocal is None:
        _SessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=get_engine())
    return _SessionLocal


class _SessionLocalProxy:
    def __call__(self):
        return _get_session_factory()()


SessionLocal = _SessionLocalProxy()


def test_connection():
    try:
        with get_engine().connect():
            logger.info("SQLAlchemy connection successful")
            return True
    except Exception as e:
        logger.error(f"Failed to connect: {type(e).__name__}: {e}")
        return False
