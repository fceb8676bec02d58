"""Logging setup for the diesel-empc CLI.

Every run writes a detailed rotating log file; a shorter console stream goes to
stderr so that stdout stays free for `--version` and piped output. Closed-loop
runs log per-step details at DEBUG, so the file is where a failed simulation is
diagnosed.
"""

import logging
import logging.handlers
import os
import sys
from typing import Tuple

LOG_FILENAME = os.environ.get("LOG_FILENAME", "diesel_empc.log")
MAX_LOG_SIZE_MB = 5
MAX_BYTES = MAX_LOG_SIZE_MB * 1024 * 1024
BACKUP_COUNT = 0  # 0 overwrites the old log on rotation

DEFAULT_LOG_LEVEL = "INFO"
LOG_LEVEL_STR = os.environ.get("LOG_LEVEL", DEFAULT_LOG_LEVEL).upper()

log_level_map = {
  "DEBUG": logging.DEBUG,
  "INFO": logging.INFO,
  "WARNING": logging.WARNING,
  "ERROR": logging.ERROR,
  "CRITICAL": logging.CRITICAL,
}

LOG_LEVEL = log_level_map.get(LOG_LEVEL_STR, logging.INFO)

CONSOLE_ENABLED = os.environ.get("LOG_CONSOLE", "1") != "0"

# Third-party loggers that flood DEBUG output (font lookup, SVG backend).
NOISY_LOGGERS = ("matplotlib", "PIL")

log_formatter = logging.Formatter(
  "%(levelname)s %(asctime)s - %(name)s:%(lineno)d - %(message)s"
)
console_formatter = logging.Formatter("%(levelname)s %(name)s: %(message)s")


def resolve_level(name: str | None) -> Tuple[int, bool]:
  """Map a level name to its constant.

  Returns:
      (level, valid): INFO and False when the name is unknown; the
        environment default when name is None.
  """
  if name is None:
    return LOG_LEVEL, LOG_LEVEL_STR in log_level_map
  normalized = name.upper()
  return log_level_map.get(normalized, logging.INFO), normalized in log_level_map


def _file_handler(path: str, level: int) -> logging.Handler:
  handler = logging.handlers.RotatingFileHandler(
    filename=path,
    maxBytes=MAX_BYTES,
    backupCount=BACKUP_COUNT,
    encoding="utf-8",
  )
  handler.setLevel(level)
  handler.setFormatter(log_formatter)
  return handler


def _install_excepthook(logger: logging.Logger) -> None:
  # A run that dies on a numerical failure still leaves its traceback in the file.
  def _handle_uncaught_exception(exc_type, exc_value, exc_traceback):
    if issubclass(exc_type, KeyboardInterrupt):
      sys.__excepthook__(exc_type, exc_value, exc_traceback)
      return
    logger.error("Uncaught exception", exc_info=(exc_type, exc_value, exc_traceback))

  sys.excepthook = _handle_uncaught_exception


def setup_logging(level: str | None = None, log_file: str | None = None) -> bool:
  """Configure the root logger for a CLI run.

  Args:
      level: Level name overriding LOG_LEVEL (the `--log-level` flag).
      log_file: Path overriding LOG_FILENAME.

  Returns:
      bool: True if file logging was successfully configured, False otherwise
  """
  resolved, valid = resolve_level(level)
  log_file_path = log_file or LOG_FILENAME

  root_logger = logging.getLogger()
  root_logger.setLevel(resolved)
  for handler in root_logger.handlers[:]:
    root_logger.removeHandler(handler)
    handler.close()

  file_logging_enabled = False
  try:
    root_logger.addHandler(_file_handler(log_file_path, resolved))
    file_logging_enabled = True
  except Exception as file_log_error:
    logging.basicConfig(level=resolved, format=log_formatter._fmt, stream=sys.stderr)
    logging.error(
      f"Failed to configure file logging to {log_file_path}: {file_log_error}"
    )

  console_logging_enabled = False
  if CONSOLE_ENABLED and not file_logging_enabled:
    # basicConfig above already attached a stderr handler
    console_logging_enabled = True
  elif CONSOLE_ENABLED:
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(resolved)
    console_handler.setFormatter(console_formatter)
    root_logger.addHandler(console_handler)
    console_logging_enabled = True

  for name in NOISY_LOGGERS:
    logging.getLogger(name).setLevel(max(resolved, logging.WARNING))

  logger = logging.getLogger(__name__)
  _install_excepthook(logger)

  if not valid:
    given = level if level is not None else os.environ.get("LOG_LEVEL")
    logger.warning(
      f"Invalid log level '{given}'. "
      f"Defaulting to '{DEFAULT_LOG_LEVEL}' ({logging.getLevelName(resolved)})."
    )

  destinations = []
  if file_logging_enabled:
    destinations.append(
      f"File ({log_file_path}, MaxSize: {MAX_LOG_SIZE_MB}MB, Backups: {BACKUP_COUNT})"
    )
  if console_logging_enabled:
    destinations.append("Console (stderr)")

  if destinations:
    logger.info(
      f"Logging configured (Level: {logging.getLevelName(resolved)}) -> {' & '.join(destinations)}"
    )
  else:
    print("CRITICAL: Logging could not be configured.", file=sys.stderr)

  return file_logging_enabled
