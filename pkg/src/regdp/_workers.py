import os


def worker_count():
    """Worker cap from ``REGDP_THREADS``, else the number of logical processors."""
    raw = os.environ.get("REGDP_THREADS")
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ValueError(f"REGDP_THREADS must be an integer, got {raw!r}") from None
        if n < 1:
            raise ValueError(f"REGDP_THREADS must be >= 1, got {n}")
        return n
    return os.cpu_count() or 1
