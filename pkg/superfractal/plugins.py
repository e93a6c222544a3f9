from importlib import import_module
from typing import Any, Callable, Mapping, Optional

from loguru import logger

from superfractal.errors import ConfigError


def load_factory(module_path: str, function_name: str) -> Callable:
    """Resolve ``module_path.function_name`` to a callable, e.g. a preset superIFS factory."""
    try:
        module = import_module(module_path)
    except ImportError as exc:
        msg = f"cannot import preset module {module_path!r}: {exc}"
        logger.error(msg)
        raise ConfigError(msg) from exc
    func = getattr(module, function_name, None)
    if func is None:
        msg = f"{module_path} has no attribute {function_name!r}"
        logger.error(msg)
        raise ConfigError(msg)
    if not callable(func):
        raise TypeError(f"{module_path}.{function_name} is not callable")
    return func


def call_factory(module_path: str, function_name: str, kwargs: Optional[Mapping[str, Any]] = None) -> Any:
    func = load_factory(module_path, function_name)
    logger.debug(f"calling {module_path}.{function_name}({dict(kwargs or {})})")
    return func(**dict(kwargs or {}))
