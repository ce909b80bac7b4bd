"""
Logging setup shared by the CLI and the property suites.

Level comes from LOG_LEVEL (default INFO). Console output goes to stderr so
that stdout stays reserved for JSON reports. When CTXKIT_LOG_DIR is set, a
rotating file handler (50MB x 3 files) is added as well.
"""

import os
import sys
import logging
from logging.handlers import RotatingFileHandler

TRACE = 5

LOG_LEVEL_MAP = {
    'CRITICAL': logging.CRITICAL,  # 50 - Fatal errors
    'FATAL': logging.CRITICAL,     # Alias for CRITICAL
    'ERROR': logging.ERROR,        # 40 - Failed commands
    'WARN': logging.WARNING,       # 30 - Tolerance warnings, caps
    'WARNING': logging.WARNING,    # Alias for WARN
    'INFO': logging.INFO,          # 20 - Command progress (DEFAULT)
    'DEBUG': logging.DEBUG,        # 10 - LP sizes, solver progress
    'TRACE': TRACE                 # 5 - Per-iteration solver state
}

# Add TRACE level if not exists
if not hasattr(logging, 'TRACE'):
    logging.TRACE = TRACE
    logging.addLevelName(TRACE, 'TRACE')

    def trace(self, message, *args, **kwargs):
        if self.isEnabledFor(TRACE):
            self._log(TRACE, message, args, **kwargs)
    logging.Logger.trace = trace

_configured = False


def resolve_level(level_str: str) -> int:
    return LOG_LEVEL_MAP.get(level_str.upper(), logging.INFO)


def configure_logging(level_str: str = None) -> int:
    """Configure the root logger once; returns the numeric level in effect"""
    global _configured
    if level_str is None:
        level_str = os.environ.get('LOG_LEVEL', 'INFO')
    log_level = resolve_level(level_str)

    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)
    if _configured:
        for handler in root_logger.handlers:
            handler.setLevel(log_level)
        return log_level

    formatter = logging.Formatter(
        '%(asctime)s [%(levelname)s] %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(log_level)
    console_handler.setFormatter(formatter)
    root_logger.addHandler(console_handler)

    log_dir = os.environ.get('CTXKIT_LOG_DIR', '')
    if log_dir:
        os.makedirs(log_dir, exist_ok=True)
        file_handler = RotatingFileHandler(
            os.path.join(log_dir, 'ctxkit.log'),
            maxBytes=50 * 1024 * 1024,  # 50MB
            backupCount=3
        )
        file_handler.setLevel(log_level)
        file_handler.setFormatter(formatter)
        root_logger.addHandler(file_handler)

    _configured = True
    logging.getLogger(__name__).debug(f"🔧 Log level set to: {level_str.upper()} ({log_level})")
    return log_level
