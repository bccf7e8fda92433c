import logging
import os
from logging.handlers import RotatingFileHandler

import config


def _dedicated_logger(name: str, filename: str) -> logging.Logger:
    log = logging.getLogger(name)
    for old in log.handlers:
        old.close()
    handler = RotatingFileHandler(os.path.join(config.LOGS_DIR, filename), maxBytes=5*1024*1024, backupCount=3)
    handler.setFormatter(logging.Formatter('%(asctime)s - %(message)s'))
    log.handlers = [handler]
    log.setLevel(logging.INFO)
    log.propagate = False  # Do not propagate to root logger
    return log


def setup_logging(level: str = None):
    os.makedirs(config.LOGS_DIR, exist_ok=True)
    level = level or config.LOG_LEVEL

    app_handler = RotatingFileHandler(os.path.join(config.LOGS_DIR, 'nllt.log'),
                                      maxBytes=10*1024*1024, backupCount=5)
    app_handler.setFormatter(logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s'))
    console = logging.StreamHandler()
    console.setFormatter(logging.Formatter('%(levelname)s - %(message)s'))

    logging.basicConfig(level=getattr(logging, str(level).upper(), logging.INFO),
                        handlers=[console, app_handler], force=True)

    # One line per command: digest, seed, wall time, exit code
    _dedicated_logger('run.audit', 'runs.log')
    # One line per Monte Carlo batch
    _dedicated_logger('sim.events', 'simulation.log')

    logging.getLogger(__name__).debug("Logging configured with multiple handlers.")
