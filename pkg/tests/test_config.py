import json

import pytest
from loguru import logger

from src.config.logging import setup_logging
from src.config.run_config import RunConfig, apply_override, parse_config
from src.config.settings import Settings
from src.core.exceptions import ConfigurationError
from src.core.types import ScalerKind, Scenario


def test_defaults():
    config = parse_config()
    assert config.seed == 0 and config.workers == 1
    assert config.betas.n == 55 and config.betas.lo == -3000.0
    assert config.fit.scenario is Scenario.FREE_E2
    assert config.molecule.to_params().E2 == 25940.0
    assert config.network_config().layer_sizes == (55, 128, 64, 32, 3)


def test_file_then_overrides_then_flags(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"seed": 3, "molecule": {"gamma2": 0.03}, "dataset": {"scaler": "robust"}}))
    config = parse_config(str(path), ["molecule.gamma2=0.04", "fit.lambdas=[0.1, 0.01]"], seed=9, out="x")
    assert config.molecule.gamma2 == 0.04
    assert config.fit.lambdas == [0.1, 0.01]
    assert config.dataset.scaler is ScalerKind.ROBUST
    assert config.seed == 9 and config.out == "x"


def test_defaults_sit_below_the_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"workers": 3}))
    assert parse_config(str(path), defaults={"workers": 2, "out": "runs/a"}).workers == 3
    assert parse_config(defaults={"workers": 2, "out": "runs/a"}).out == "runs/a"


def test_string_override_values():
    config = parse_config(overrides=["fit.scenario=fixed_e2", "dataset.scaler=robust+winsor"])
    assert config.fit.scenario is Scenario.FIXED_E2
    assert config.dataset.scaler is ScalerKind.ROBUST_WINSOR


@pytest.mark.parametrize("overrides, key", [
    (["molecule.gamma2=-1"], "molecule.gamma2"),
    (["fit.bogus=1"], "fit.bogus"),
    (["time_grid.fine_dt=0.05"], "time_grid.fine_dt"),
    (["workers=0"], "workers"),
])
def test_invalid_values_name_their_key(overrides, key):
    with pytest.raises(ConfigurationError) as info:
        parse_config(overrides=overrides)
    assert info.value.details["key"] == key
    assert key in info.value.message


def test_domain_checks_name_section():
    with pytest.raises(ConfigurationError) as info:
        parse_config(overrides=["molecule.E2=1000"])
    assert info.value.details["key"] == "molecule"

    with pytest.raises(ConfigurationError) as info:
        parse_config(overrides=["ranges.gamma2=[0.05, 0.01]"])
    assert info.value.details["key"] == "ranges"


def test_winsor_order_is_checked():
    with pytest.raises(ConfigurationError, match="winsor"):
        parse_config(overrides=["dataset.winsor_lo_pct=99", "dataset.winsor_hi_pct=1"])


def test_malformed_override():
    with pytest.raises(ConfigurationError):
        apply_override({}, "no-equals-sign")
    raw = {"fit": 3}
    with pytest.raises(ConfigurationError):
        apply_override(raw, "fit.lam=1")


def test_missing_and_broken_files(tmp_path):
    with pytest.raises(ConfigurationError, match="not found"):
        parse_config(str(tmp_path / "none.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2]")
    with pytest.raises(ConfigurationError, match="JSON object"):
        parse_config(str(bad))
    bad.write_text("{oops")
    with pytest.raises(ConfigurationError, match="valid JSON"):
        parse_config(str(bad))


def test_echo_is_plain_json():
    echoed = RunConfig().echo()
    assert json.loads(json.dumps(echoed)) == echoed
    assert echoed["dataset"]["scaler"] == "standard"


def test_train_config_carries_seed():
    config = parse_config(seed=5, overrides=["train.epochs=10", "train.patience=3"])
    assert config.train_config().seed == 5
    assert config.train_config().epochs == 10


def test_settings_from_environment(monkeypatch):
    monkeypatch.setenv("PLSIM_LOG_LEVEL", "DEBUG")
    monkeypatch.setenv("PLSIM_WORKERS", "4")
    settings = Settings()
    assert settings.logging.level == "DEBUG"
    assert settings.run.workers == 4
    assert settings.run.output_dir == "runs"


def test_setup_logging_writes_bound_component(tmp_path):
    log_file = tmp_path / "plsim.log"
    setup_logging(Settings(log_file_path=str(log_file), log_level="INFO"))
    try:
        logger.bind(component="fitter").info("starts queued")
        logger.debug("not at this level")
    finally:
        logger.remove()
    text = log_file.read_text()
    assert "fitter" in text and "starts queued" in text
    assert "not at this level" not in text
