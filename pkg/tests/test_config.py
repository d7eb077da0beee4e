import os
from glob import glob
from os.path import join as pjoin

import pytest
from jsonlines import jsonlines
from pydantic import ValidationError

from physmorph.config import (
    CONFIG_ECHO_FILENAME,
    CONFIG_HISTORY_FILENAME,
    PhysMorphConfig,
    PhysMorphValidationError,
    ShapeKind,
    load_physmorph_config,
    parse_config,
    save_config,
)
from tests.utils import CONFIG_ROOT, MICRO_CONFIG, write_json


def test_loading_config():
    all_configs = glob(pjoin(CONFIG_ROOT, "**/*.json"), recursive=True)
    assert len(all_configs) > 0, f"No config found in {CONFIG_ROOT}!"

    exceptions = []
    for c in all_configs:
        try:
            PhysMorphConfig.parse_file(c)
        except Exception as e:
            exceptions.append({"file": c, "exceptions": e})
    if exceptions:
        raise RuntimeError(f"Found the following errors: {exceptions}")


def test_empty_file_gives_defaults(tmp_path):
    path = tmp_path / "conf.json"
    path.write_text("")
    cfg = load_physmorph_config(str(path), {"output_dir": str(tmp_path / "out")})
    default = PhysMorphConfig(output_dir=str(tmp_path / "out"))
    assert cfg == default
    assert cfg.simulation.grid_resolution == 32
    assert cfg.target.kind == ShapeKind.box


def test_missing_file(tmp_path):
    with pytest.raises(EnvironmentError):
        load_physmorph_config(str(tmp_path / "nope.json"))


def test_invalid_values(tmp_path):
    with pytest.raises(PhysMorphValidationError, match="grid_resolution"):
        parse_config({"simulation": {"grid_resolution": 0}})
    with pytest.raises(PhysMorphValidationError):
        parse_config({"potato": 1})
    with pytest.raises(PhysMorphValidationError):
        parse_config({"simulation": {"control_stride": 4}})
    with pytest.raises(PhysMorphValidationError, match="near"):
        parse_config({"camera": {"near": 5.0, "far": 1.0}})
    with pytest.raises(PhysMorphValidationError, match="young_modulus"):
        parse_config({"simulation": {"young_modulus": 1000.0}})
    with pytest.raises(PhysMorphValidationError, match="path"):
        parse_config({"target": {"kind": "mesh"}})

    path = write_json(str(tmp_path / "list.json"), [1, 2])
    with pytest.raises(PhysMorphValidationError):
        load_physmorph_config(path, echo=False)
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(PhysMorphValidationError):
        load_physmorph_config(str(bad), echo=False)


def test_young_poisson():
    cfg = parse_config({"simulation": {"young_modulus": 3000.0, "poisson_ratio": 0.2}})
    assert cfg.simulation.lame_mu == pytest.approx(1250.0)
    assert cfg.simulation.lame_lambda == pytest.approx(3000.0 * 0.2 / (1.2 * 0.6))


def test_overrides_are_merged(tmp_path):
    cfg = load_physmorph_config(
        MICRO_CONFIG,
        {"output_dir": str(tmp_path), "optimization": {"episodes": 7}, "seed": 3},
        echo=False,
    )
    assert cfg.optimization.episodes == 7
    # Siblings of an overridden key keep their file value.
    assert cfg.optimization.target_mass_samples == 20000
    assert cfg.seed == 3


def test_echo_and_history(tmp_path):
    overrides = {"output_dir": str(tmp_path)}
    cfg = load_physmorph_config(MICRO_CONFIG, overrides)
    load_physmorph_config(MICRO_CONFIG, overrides)

    assert os.path.isfile(pjoin(tmp_path, CONFIG_ECHO_FILENAME))
    assert PhysMorphConfig.parse_file(pjoin(tmp_path, CONFIG_ECHO_FILENAME)) == cfg
    with jsonlines.open(pjoin(tmp_path, CONFIG_HISTORY_FILENAME), "r") as reader:
        history = list(reader)
    assert len(history) == 2
    assert history[0]["name"] == "micro"


def test_save_config(tmp_path):
    cfg = parse_config({"name": "saved", "seed": 12, "output_dir": str(tmp_path)})
    path = pjoin(tmp_path, "nested", "conf.json")
    save_config(cfg, path)
    reloaded = load_physmorph_config(path, echo=False)
    assert reloaded == cfg
    assert reloaded.to_hash() == cfg.to_hash()


def test_copy_validates():
    cfg = PhysMorphConfig()
    assert cfg.copy(update={"seed": 5}).seed == 5
    with pytest.raises(ValidationError):
        cfg.copy(update={"seed": -1})
