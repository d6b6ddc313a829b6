"""
单次运行的协作式超时
"""

import time
from typing import Optional

from ..models.errors import RunTimeoutError


class Deadline:
    """在长循环的检查点调用 check()，超时抛出 RunTimeoutError"""

    def __init__(self, seconds: Optional[float]):
        self.seconds = seconds
        self.started = time.monotonic()

    @property
    def elapsed(self) -> float:
        return time.monotonic() - self.started

    def expired(self) -> bool:
        return self.seconds is not None and self.elapsed >= self.seconds

    def check(self, where: str = "") -> None:
        if self.expired():
            raise RunTimeoutError(
                f"运行超过时限 {self.seconds} 秒" + (f"（{where}）" if where else ""),
                code="TIMEOUT",
            )
