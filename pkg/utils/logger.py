# utils/logger.py
"""
Category logger shared by the matchers, the CLI and the API.
Entries are kept in a bounded ring (served by the API /status endpoint) and echoed
to stderr; stdout is reserved for command output.
"""

import sys
from collections import deque
from datetime import datetime
from typing import Deque, Dict, List


LEVELS = {'DEBUG': 10, 'INFO': 20, 'WARNING': 30, 'ERROR': 40}


class SimpleLogger:
    """Ring-buffered logger with a minimum level and an on/off console echo"""

    def __init__(self, max_logs: int = 500, level: str = "INFO"):
        self.logs: Deque[Dict] = deque(maxlen=max_logs)
        self.enabled = True
        self.min_level = LEVELS.get(level.upper(), LEVELS['INFO'])

    def set_level(self, level: str):
        """Unknown level names leave the current level in place"""
        self.min_level = LEVELS.get(level.upper(), self.min_level)

    def log(self, message: str, category: str = "GENERAL", level: str = "INFO"):
        level = level.upper()
        if LEVELS.get(level, LEVELS['INFO']) < self.min_level:
            return

        entry = {
            'timestamp': datetime.now(),
            'level': level,
            'category': category.upper(),
            'message': message
        }
        # recorded even when the console echo is off
        self.logs.append(entry)

        if self.enabled:
            print(f"[{entry['timestamp']:%H:%M:%S}] {level} {entry['category']}: {message}", file=sys.stderr)

    def debug(self, message: str, category: str = "GENERAL"):
        self.log(message, category, "DEBUG")

    def info(self, message: str, category: str = "GENERAL"):
        self.log(message, category, "INFO")

    def warning(self, message: str, category: str = "GENERAL"):
        self.log(message, category, "WARNING")

    def error(self, message: str, category: str = "GENERAL"):
        self.log(message, category, "ERROR")

    def get_recent_logs(self, count: int = 10) -> List[Dict]:
        """Newest entries last"""
        return list(self.logs)[-count:] if count > 0 else []


# Global logger instance
logger = SimpleLogger()
