import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).absolute().parent / 'src'))

if __name__ == '__main__':
    from util.logging_utils import DEFAULT_LOGGER, get_logger
    import cli

    logger = get_logger(DEFAULT_LOGGER)
    try:
        cli.main()
    except KeyboardInterrupt:
        logger.warning("interrupted")
        sys.exit(130)
