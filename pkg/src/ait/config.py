"""Project configuration.

A project is any directory the CLI runs in.  Settings live in
``.ait/config.yaml`` under the project root; every key is optional and
missing keys fall back to the defaults below.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .yamlio import load_yaml

CONFIG_RELPATH = Path(".ait") / "config.yaml"

DEFAULT_SERVE_PORT = 49721
DEFAULT_HTTP_PORT = 49722


class ConfigError(Exception):
    pass


@dataclass
class ProjectConfig:
    root: Path = field(default_factory=Path.cwd)
    data_dir: Path = Path(".ait")
    serve_port: int = DEFAULT_SERVE_PORT
    http_port: int = DEFAULT_HTTP_PORT
    framework_markers: list[str] = field(
        default_factory=lambda: ["langchain", "langgraph"]
    )
    pass_threshold: float = 0.5

    def __post_init__(self) -> None:
        self.root = Path(self.root)
        self.data_dir = Path(self.data_dir)
        if self.serve_port == self.http_port:
            raise ConfigError(
                f"serve_port and http_port must differ, both are {self.serve_port}"
            )
        for label, port in (("serve_port", self.serve_port), ("http_port", self.http_port)):
            if not isinstance(port, int) or isinstance(port, bool) or not 0 <= port <= 65535:
                raise ConfigError(f"{label} must be an integer in 0..65535, got {port!r}")
        if not isinstance(self.pass_threshold, (int, float)) or isinstance(self.pass_threshold, bool):
            raise ConfigError(f"pass_threshold must be a number, got {self.pass_threshold!r}")
        if not 0.0 <= float(self.pass_threshold) <= 1.0:
            raise ConfigError(f"pass_threshold must lie in [0, 1], got {self.pass_threshold}")
        self.pass_threshold = float(self.pass_threshold)
        if not isinstance(self.framework_markers, list) or not all(
            isinstance(m, str) and m for m in self.framework_markers
        ):
            raise ConfigError("framework_markers must be a list of non-empty strings")

    @property
    def data_path(self) -> Path:
        """Absolute data directory (relative paths resolve against the root)."""
        d = self.data_dir
        return d if d.is_absolute() else self.root / d

    @property
    def traces_dir(self) -> Path:
        return self.data_path / "traces"

    @property
    def datasets_dir(self) -> Path:
        return self.data_path / "datasets"

    @property
    def evals_dir(self) -> Path:
        return self.data_path / "evals"

    @classmethod
    def load(cls, root: Path | str | None = None) -> "ProjectConfig":
        root = Path(root) if root is not None else Path.cwd()
        path = root / CONFIG_RELPATH
        if not path.is_file():
            return cls(root=root)
        raw = load_yaml(path)
        if raw is None:
            return cls(root=root)
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        known = {"data_dir", "serve_port", "http_port", "framework_markers", "pass_threshold"}
        kwargs: dict[str, Any] = {}
        for key, value in raw.items():
            if key not in known:
                continue
            kwargs[key] = value
        if "data_dir" in kwargs:
            kwargs["data_dir"] = Path(kwargs["data_dir"])
        try:
            return cls(root=root, **kwargs)
        except TypeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
