import logging
import os
import sys

RESET = '\033[0m'

LEVEL_COLORS = {
    logging.DEBUG: '\033[35m',
    logging.INFO: '\033[32m',
    logging.WARNING: '\033[33m',
    logging.ERROR: '\033[31m',
    logging.CRITICAL: '\033[31m',
}

# DEBUG 와 ERROR 이상은 호출 위치를 함께 출력
_SHORT_FORMAT = '%(levelname)s [%(name)s] %(message)s'
_LONG_FORMAT = _SHORT_FORMAT + ' (%(filename)s:%(lineno)d)'


def _use_color(stream) -> bool:
    if os.getenv("NO_COLOR"):
        return False
    return hasattr(stream, "isatty") and stream.isatty()


class ColoredLevelFormatter(logging.Formatter):
    def __init__(self, color: bool = True):
        super().__init__()
        self.color = color
        self._short = logging.Formatter(_SHORT_FORMAT)
        self._long = logging.Formatter(_LONG_FORMAT)

    def format(self, record):
        levelname = record.levelname
        prefix = LEVEL_COLORS.get(record.levelno, '') if self.color else ''
        suffix = RESET if prefix else ''
        record.levelname = f"{prefix}{levelname}:{suffix}"
        verbose = record.levelno == logging.DEBUG or record.levelno >= logging.ERROR
        try:
            return (self._long if verbose else self._short).format(record)
        finally:
            record.levelname = levelname


class ColoredLogHandler(logging.StreamHandler):
    """stderr 로 레벨별 색상 로그 출력 (NO_COLOR / 비 TTY 에서는 색상 없음)"""

    def __init__(self, stream=None):
        super().__init__(stream or sys.stderr)
        self.setLevel(logging.DEBUG)
        self.setFormatter(ColoredLevelFormatter(color=_use_color(self.stream)))


def set_log_level(level) -> None:
    """루트 로거 레벨 변경 (CLI --log-level)"""
    if isinstance(level, str):
        level = getattr(logging, level.upper(), logging.INFO)
    logging.getLogger().setLevel(level)
