import logging

_FORMAT = "[%(tag)s] %(message)s"


class _TagAdapter(logging.LoggerAdapter):
    def process(self, msg, kwargs):
        kwargs.setdefault("extra", {})["tag"] = self.extra["tag"]
        return msg, kwargs


def get_logger(tag: str) -> logging.LoggerAdapter:
    """Logger whose records render as ``[TAG] message``."""
    return _TagAdapter(logging.getLogger(f"s2spm.{tag.lower()}"), {"tag": tag.upper()})


def configure_logging(level: str = "INFO") -> None:
    root = logging.getLogger("s2spm")
    if not any(getattr(h, "_s2spm", False) for h in root.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(_FORMAT))
        handler._s2spm = True
        root.addHandler(handler)
    root.setLevel(level.upper())
    root.propagate = False
