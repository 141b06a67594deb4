import functools
import logging
import pprint
import time
import traceback
from typing import Callable

logger = logging.getLogger(__name__)


class Decorators:
    @staticmethod
    def log_exception(f: Callable) -> Callable:
        @functools.wraps(f)
        def _log_exception(*args, **kwargs):
            try:
                return f(*args, **kwargs)
            except Exception as exc:
                logger.error(pprint.pformat(traceback.format_exception(type(exc), exc, exc.__traceback__)))
                raise
        return _log_exception

    @staticmethod
    def log_duration(f: Callable) -> Callable:
        @functools.wraps(f)
        def _log_duration(*args, **kwargs):
            start_time = time.time()
            try:
                return f(*args, **kwargs)
            finally:
                time_passed = time.time() - start_time
                logger.info(f"{f.__name__}: time passed: {time_passed // 60:.0f} minutes.")
        return _log_duration
