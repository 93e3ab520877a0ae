import logging
import os

DEFAULT_LOGGER = 'spatial_lrv'
LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'

_configured = False


def get_logger(name: str = DEFAULT_LOGGER) -> logging.Logger:
    """
    Returns a logger below the project's root logger. The root logger gets one stderr handler the
    first time this is called; its level comes from LRV_LOG_LEVEL (default WARNING).
    """
    global _configured
    root = logging.getLogger(DEFAULT_LOGGER)
    if not _configured:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        root.addHandler(handler)
        root.setLevel(os.environ.get('LRV_LOG_LEVEL', 'WARNING').upper())
        root.propagate = False
        _configured = True
    if name == DEFAULT_LOGGER or name.startswith(DEFAULT_LOGGER + '.'):
        return logging.getLogger(name)
    return root.getChild(name)


def set_level(level: str):
    get_logger().setLevel(level.upper())
