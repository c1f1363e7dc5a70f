import logging
import re
import sys
from pathlib import Path
from datetime import datetime
from typing import Optional
from colorama import init, Fore, Style

# Initialize colorama for Windows support
init(autoreset=True)

# Define custom log levels globally
STAGE_LEVEL = 22
EPOCH_LEVEL = 23
METRIC_LEVEL = 24

# Add custom level names
logging.addLevelName(STAGE_LEVEL, 'STAGE')
logging.addLevelName(EPOCH_LEVEL, 'EPOCH')
logging.addLevelName(METRIC_LEVEL, 'METRIC')

_RICH_TAG = re.compile(r'\[/?(?:bold|dim|italic|cyan|green|yellow|red|magenta|blue)(?:\s+\w+)?\]')


# Add custom methods to logging.Logger class so all loggers have them
def stage(self, message, *args, **kwargs):
    if self.isEnabledFor(STAGE_LEVEL):
        self._log(STAGE_LEVEL, message, args, **kwargs)

def epoch(self, message, *args, **kwargs):
    if self.isEnabledFor(EPOCH_LEVEL):
        self._log(EPOCH_LEVEL, message, args, **kwargs)

def metric(self, message, *args, **kwargs):
    if self.isEnabledFor(METRIC_LEVEL):
        self._log(METRIC_LEVEL, message, args, **kwargs)

logging.Logger.stage = stage
logging.Logger.epoch = epoch
logging.Logger.metric = metric


def strip_markup(message: str) -> str:
    """Remove Rich markup tags so plain handlers stay readable."""
    return _RICH_TAG.sub('', message)


class CleanFormatter(logging.Formatter):
    """Custom formatter with clean | separator format"""

    # Level name mappings with colors
    LEVEL_COLORS = {
        'DEBUG': Fore.CYAN,
        'INFO': Fore.GREEN,
        'WARNING': Fore.YELLOW,
        'ERROR': Fore.RED,
        'CRITICAL': Fore.RED + Style.BRIGHT,
        'STAGE': Fore.BLUE,
        'EPOCH': Fore.MAGENTA,
        'METRIC': Fore.GREEN + Style.BRIGHT,
    }

    def format(self, record):
        timestamp = datetime.fromtimestamp(record.created).strftime('%H:%M:%S')
        level_name = record.levelname
        level_color = self.LEVEL_COLORS.get(level_name, Fore.WHITE)
        message = strip_markup(record.getMessage())

        # Format: [HH:MM:SS] ▕ LEVEL ▏ Message
        return (
            f"{Fore.WHITE}[{timestamp}] "
            f"▕ {level_color}{level_name:^6}{Style.RESET_ALL} ▏ "
            f"{message}"
        )


class PlainFileFormatter(logging.Formatter):
    """Technical file format without console markup."""

    def format(self, record):
        record.msg = strip_markup(str(record.msg))
        return super().format(record)


def setup_logger(name: str, log_level: str = "INFO", log_file: Optional[str] = None) -> logging.Logger:
    """
    Setup a standardized logger with clean | separator format.
    """
    logger = logging.getLogger(name)
    logger.setLevel(log_level)

    # Clear existing handlers
    if logger.handlers:
        logger.handlers.clear()

    # --- Console Handler with Clean Format ---
    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setFormatter(CleanFormatter())
    logger.addHandler(console_handler)

    # --- File Handler (Technical) ---
    if log_file:
        file_formatter = PlainFileFormatter(
            '%(asctime)s - [%(levelname)s] - %(name)s - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )
        try:
            Path(log_file).parent.mkdir(parents=True, exist_ok=True)
            file_handler = logging.FileHandler(log_file, encoding='utf-8')
            file_handler.setFormatter(file_formatter)
            logger.addHandler(file_handler)
        except OSError:
            logger.warning(f"⚠️ Could not open log file {log_file}; console only")

    # Suppress verbose logs
    logging.getLogger("PIL").setLevel(logging.WARNING)
    logging.getLogger("asyncio").setLevel(logging.WARNING)

    return logger


def reconfigure_all(log_level: str, log_file: Optional[str] = None) -> None:
    """Re-apply level and file handler to every logger created via setup_logger."""
    for name, existing in list(logging.Logger.manager.loggerDict.items()):
        if not isinstance(existing, logging.Logger):
            continue
        if any(isinstance(h.formatter, CleanFormatter) for h in existing.handlers):
            setup_logger(name, log_level, log_file)
