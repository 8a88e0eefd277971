import logging

from app.core.config import settings

_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
_configured = False


def setup_logging(level: str | None = None) -> None:
    """Один раз настраивает root-логгер. Повторный вызов только меняет уровень."""
    global _configured
    lvl = (level or settings.log_level).upper()
    if not _configured:
        logging.basicConfig(level=lvl, format=_FORMAT)
        _configured = True
    logging.getLogger().setLevel(lvl)
