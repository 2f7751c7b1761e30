"""
Logging Configuration
Provides structured logging with rotation for the verification pipelines
"""

import logging
import logging.handlers
from pathlib import Path
from datetime import datetime, timezone
from typing import Optional

from pythonjsonlogger import jsonlogger

from config import get_config

_configured = False


class JSONFormatter(jsonlogger.JsonFormatter):
    """JSON formatter for structured logging"""

    def add_fields(self, log_record, record, message_dict):
        super().add_fields(log_record, record, message_dict)
        log_record['timestamp'] = datetime.now(timezone.utc).isoformat()
        log_record['level'] = record.levelname
        log_record['logger'] = record.name
        log_record['function'] = record.funcName
        log_record['line'] = record.lineno

        # Add extra fields
        if hasattr(record, 'extra_fields'):
            log_record.update(record.extra_fields)


def setup_logging(level: Optional[str] = None):
    """Setup application logging (idempotent)"""
    global _configured
    root_logger = logging.getLogger()
    config = get_config()
    log_level = getattr(logging, (level or config.log_level).upper(), logging.INFO)
    root_logger.setLevel(log_level)

    if _configured:
        for handler in root_logger.handlers:
            if not isinstance(handler.formatter, JSONFormatter):
                handler.setLevel(log_level)
        return root_logger

    # Console handler
    console_handler = logging.StreamHandler()
    console_handler.setLevel(log_level)

    if config.debug:
        console_formatter = logging.Formatter(
            '[%(asctime)s] [%(levelname)s] [%(name)s:%(funcName)s:%(lineno)d] %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )
    else:
        console_formatter = logging.Formatter(
            '[%(asctime)s] [%(levelname)s] %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )

    console_handler.setFormatter(console_formatter)
    root_logger.addHandler(console_handler)

    logs_dir = Path(config.log_dir)
    try:
        logs_dir.mkdir(parents=True, exist_ok=True)
    except OSError:
        root_logger.warning(f"Log directory {logs_dir} not writable, file logging disabled")
        _configured = True
        return root_logger

    # File handler with rotation
    log_file = logs_dir / f"bscalc-{datetime.now().strftime('%Y-%m-%d')}.log"
    file_handler = logging.handlers.RotatingFileHandler(
        log_file,
        maxBytes=10 * 1024 * 1024,  # 10MB
        backupCount=7
    )
    file_handler.setLevel(log_level)
    file_handler.setFormatter(console_formatter)
    root_logger.addHandler(file_handler)

    # JSON file handler for structured logging
    json_log_file = logs_dir / f"bscalc-json-{datetime.now().strftime('%Y-%m-%d')}.jsonl"
    json_handler = logging.handlers.RotatingFileHandler(
        json_log_file,
        maxBytes=10 * 1024 * 1024,
        backupCount=7
    )
    json_handler.setLevel(logging.WARNING)  # Only warnings and errors as JSON
    json_handler.setFormatter(JSONFormatter('%(message)s'))
    root_logger.addHandler(json_handler)

    _configured = True
    return root_logger


def get_logger(name: str) -> logging.LoggerAdapter:
    """Get logger for module"""
    setup_logging()
    return logging.LoggerAdapter(
        logging.getLogger(name),
        extra={'extra_fields': {}}
    )


class LogContext:
    """Context manager for adding extra fields to logs"""

    def __init__(self, logger: logging.LoggerAdapter, **fields):
        self.logger = logger
        self.fields = fields

    def __enter__(self):
        self.logger.extra['extra_fields'].update(self.fields)
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        for key in self.fields:
            self.logger.extra['extra_fields'].pop(key, None)
