from collections import deque

class ScriptedRng:
    """Returns queued values from randrange; randbytes and uniform are fixed."""

    def __init__(self, *values: int) -> None:
        self.values: deque[int] = deque(values)

    def push(self, *values: int) -> None:
        self.values.extend(values)

    def randrange(self, start: int, stop: int | None = None) -> int:
        low, high = (0, start) if stop is None else (start, stop)
        value = self.values.popleft()
        assert low <= value < high, "scripted value {} outside [{}, {})".format(value, low, high)
        return value

    def randbytes(self, n: int) -> bytes:
        return bytes(n)

    def uniform(self, a: float, b: float) -> float:
        return a
