import functools
import logging
from logging import Logger
from time import perf_counter
from typing import Callable, Dict

logger: Logger = logging.getLogger(__name__)
timing_logger: Logger = logging.getLogger("txreach.timing")

Handler = Callable[..., int]


def timed(command: str, handler: Handler) -> Handler:
    """Log the wall time of every run of `handler` on the timing logger."""

    @functools.wraps(handler)
    def wrapper(*args, **kwargs) -> int:
        start_command = perf_counter()
        try:
            return handler(*args, **kwargs)
        finally:
            elapsed = perf_counter() - start_command
            timing_logger.info("done", extra={"command": command, "elapsed": f"{elapsed:.8f}"})

    return wrapper


def setup_middleware(handlers: Dict[str, Handler]) -> Dict[str, Handler]:
    return {command: timed(command, handler) for command, handler in handlers.items()}
