"""
Resilience Utilities
Bounded retry decorator for steps that may legitimately miss their target
on a given random draw (e.g. phantom lesion painting).
"""
from functools import wraps
from typing import Callable, Tuple, Type

from config.settings import settings
from config.logger_config import setup_logger

logger = setup_logger("Resilience", settings.log_level)


def with_retries(
    retries: int = 3,
    exceptions: Tuple[Type[Exception], ...] = (Exception,),
    give_up: Callable[[str, Exception], Exception] = None,
):
    """
    Decorator to retry a function a bounded number of times.

    The wrapped function receives the zero-based ``attempt`` keyword so it can
    derive a fresh, deterministic random stream per attempt.

    Args:
        retries: Maximum number of retries after the first attempt.
        exceptions: Exceptions to catch and retry on.
        give_up: Optional factory turning the final exception into the raised one.
    """
    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            for attempt in range(retries + 1):
                try:
                    return func(*args, attempt=attempt, **kwargs)
                except exceptions as e:
                    if attempt == retries:
                        logger.error(f"❌ {func.__name__} failed after {retries} retries: {e}")
                        if give_up is not None:
                            raise give_up(func.__name__, e) from e
                        raise
                    logger.debug(f"⚠️ {func.__name__} missed (attempt {attempt + 1}/{retries}): {e}")

        return wrapper
    return decorator
