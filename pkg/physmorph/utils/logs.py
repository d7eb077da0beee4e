"""Structured logging setup shared by the library and the command line."""
import collections
import inspect
import logging
import os
import time
from typing import List, Optional, TextIO

import structlog
from structlog.dev import ConsoleRenderer
from structlog.processors import StackInfoRenderer, TimeStamper, format_exc_info
from structlog.stdlib import add_log_level

log = structlog.get_logger(__name__)

RUN_LOG_FILENAME = "physmorph.log"

_RED, _GREEN, _YELLOW, _BLUE, _GRAY = 31, 32, 33, 34, 37

_run_log: Optional[TextIO] = None


def set_logger_config(level=logging.INFO, log_dir: Optional[str] = None):
    """Set log configuration to our standard.

    Args:
        level: Logging level to use
        log_dir: When set, every line is also appended, without colors, to
            `<log_dir>/physmorph.log`.
    """
    global _run_log
    if _run_log is not None:
        _run_log.close()
        _run_log = None
    if log_dir:
        os.makedirs(log_dir, exist_ok=True)
        _run_log = open(run_log_path(log_dir), "a", buffering=1)
    structlog.configure(
        processors=[
            structlog.stdlib.PositionalArgumentsFormatter(),
            StackInfoRenderer(),
            format_exc_info,
            structlog.processors.UnicodeDecoder(),
            TimeStamper(fmt="iso", utc=True),
            add_log_level,
            add_caller_info,
            order_keys,
            RunConsoleRenderer(_run_log),
        ],
        context_class=dict,
        wrapper_class=structlog.make_filtering_bound_logger(level),
        cache_logger_on_first_use=False,
    )


def run_log_path(log_dir: str) -> str:
    return os.path.join(log_dir, RUN_LOG_FILENAME)


def _level_styles():
    color = {
        "critical": _RED,
        "exception": _RED,
        "error": _RED,
        "warning": _YELLOW,
        "info": _GREEN,
        "debug": _BLUE,
        "notset": _GRAY,
    }
    return {level: f"\x1b[{code}m" for level, code in color.items()}


def add_caller_info(logger, method_name, event_dict):
    """Add the name of the module that emitted the log."""
    frame = inspect.currentframe()
    while frame is not None:
        frame = frame.f_back
        if frame is None:
            break
        module = frame.f_globals["__name__"]
        if module.startswith("structlog.") or module == __name__:
            continue
        event_dict["module"] = module
        break
    return event_dict


def order_keys(logger, method_name, event_dict):
    return collections.OrderedDict(
        sorted(event_dict.items(), key=lambda item: (item[0] != "event", item))
    )


class RunConsoleRenderer:
    """Console lines prefixed by the module name, teed to a plain run log when configured."""

    def __init__(self, run_log: Optional[TextIO] = None):
        self._colored = ConsoleRenderer(level_styles=_level_styles())
        self._plain = ConsoleRenderer(colors=False)
        self._file = run_log

    def __call__(self, logger, log_method, event_dict):
        prefix = f"[{event_dict.pop('module', None)}] "
        # Seconds precision is enough to follow a run.
        event_dict["timestamp"] = event_dict.get("timestamp", "")[:19]
        if self._file is not None:
            self._file.write(prefix + self._plain(logger, log_method, dict(event_dict)) + "\n")
        return prefix + self._colored(logger, log_method, event_dict)


class TimerLogging:
    """
    Context manager logging the duration of a stage at debug level.

    Args:
        name: How to name the Timer.

    Examples:
        ```
        with TimerLogging("simulate") as timer:
            simulate(...)
        # logs: "Complete duration=1.52 name=simulate", timer.duration == 1.52
        ```

    """

    def __init__(self, name: str):
        self.start: Optional[float] = None
        self.duration: Optional[float] = None
        self.name = name

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        if self.start is not None:
            self.duration = round(time.perf_counter() - self.start, 3)
            log.debug("Complete", name=self.name, duration=self.duration)


class MultipleExceptions(Exception):
    def __init__(self, exceptions: List[Exception], message="We found the following exceptions: "):
        super().__init__(exceptions, message)
        self.exceptions = exceptions
        self.message = message

    def __str__(self):
        return f"{self.message} \n\t" + "\n".join(map(str, self.exceptions))
