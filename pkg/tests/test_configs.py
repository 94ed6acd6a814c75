from pathlib import Path

import pytest

from multiscale_rg.cli import load_config, parse_levels, parse_model

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
COMMAND = {"blowup": "simulate", "post": "simulate", "sample": "simulate", "maps": "rg",
           "expectations": "mc", "circle": "phase"}


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.yaml")), ids=lambda p: p.stem)
def test_shipped_configs_load(path):
    cfg = load_config(COMMAND[path.stem.split("_")[0]], str(path), [])
    parse_model(cfg["model"])
    parse_levels(cfg["N"])
