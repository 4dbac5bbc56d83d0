import os
import tempfile
from pathlib import Path
from typing import Union
from platformdirs import user_config_dir

APP_NAME = "BenchLattice"
APP_AUTHOR = "BenchLattice"

def get_config_dir() -> Path:
    """Returns the configuration directory for the application."""
    path = Path(user_config_dir(APP_NAME, APP_AUTHOR))
    path.mkdir(parents=True, exist_ok=True)
    return path

def get_assets_dir() -> Path:
    """Returns the assets directory."""
    # src/utils/paths.py -> assets/
    base_dir = Path(__file__).parent.parent.parent
    return base_dir / "assets"

def get_fixtures_dir() -> Path:
    """Returns the directory holding the shipped sample registries and suites."""
    return get_assets_dir() / "fixtures"

def atomic_write_text(path: Union[str, Path], text: str) -> Path:
    """
    Write text next to the target and rename it into place, so a failed
    write never leaves a partial file behind.
    """
    target = Path(path)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{target.name}.", suffix=".tmp", dir=target.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp_name, target)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise
    return target
