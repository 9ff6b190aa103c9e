import dataclasses

import pytest

from bzstreets.config import MaskSource, RunConfig, from_ini, load_config, parse_sites, to_ini
from bzstreets.errors import ConfigError
from bzstreets.medium import OregonatorParams, PerturbationSpec


def test_default_roundtrip():
    cfg = RunConfig()
    assert from_ini(to_ini(cfg)) == cfg


def test_non_default_roundtrip():
    cfg = RunConfig(perturbations=(PerturbationSpec((3, 4), 5, 0.75),), seed=9)
    cfg = cfg.replace("params", phi=0.0625, u_min=None)
    cfg = cfg.replace("mask", kind="ring", size=80, street_width=7)
    cfg = cfg.replace("output", frames=True, dir="elsewhere")
    text = to_ini(cfg)
    again = from_ini(text)
    assert again == cfg
    assert to_ini(again) == text
    assert "u_min = none" in text


def test_empty_text_gives_defaults():
    assert from_ini("") == RunConfig()


@pytest.mark.parametrize("text, needle", [
    ("[nonsense]\nx = 1\n", "unknown section"),
    ("[params]\nphi2 = 0.05\n", "unknown key params.phi2"),
    ("[params]\nphi = abc\n", "params.phi"),
    ("[output]\nframes = maybe\n", "output.frames"),
    ("[params]\nphi = -1\n", "[params]"),
    ("[mask]\nkind = hexagon\n", "mask.kind"),
    ("not an ini file", "<config>"),
])
def test_bad_configs(text, needle):
    with pytest.raises(ConfigError) as info:
        from_ini(text)
    assert needle in str(info.value)


def test_parse_sites_defaults_and_errors():
    assert parse_sites("1,2") == (PerturbationSpec((1, 2), 20, 1.0),)
    assert parse_sites(" 1,2,3 ; 4,5,6,0.5 ;") == (PerturbationSpec((1, 2), 3),
                                                   PerturbationSpec((4, 5), 6, 0.5))
    assert parse_sites("") == ()
    for bad in ("1", "1,2,3,4,5", "a,b", "1,2,0"):
        with pytest.raises(ConfigError):
            parse_sites(bad)


def test_default_perturbation_placement():
    cfg = RunConfig()
    mask = cfg.mask.build()
    (site,) = cfg.resolve_perturbations(mask)
    assert site.side == 20
    assert site.origin == cfg.mask.grid_city_spec().perturbation_origin(20)
    open_cfg = cfg.replace("mask", kind="open-field", width=64, height=40)
    (site,) = open_cfg.resolve_perturbations(open_cfg.mask.build())
    assert site.origin == (10, 22)


def test_explicit_sites_win():
    sites = (PerturbationSpec((0, 0), 2),)
    cfg = dataclasses.replace(RunConfig(), perturbations=sites)
    assert cfg.resolve_perturbations(cfg.mask.build()) == sites


def test_validate_missing_mask_file(tmp_path):
    cfg = RunConfig(mask=MaskSource(kind="file", path=str(tmp_path / "nope.png")))
    with pytest.raises(ConfigError, match="nope.png"):
        cfg.validate()


def test_load_config_from_disk(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text("[params]\nphi = 0.07\n[run]\nseed = 4\n")
    cfg = load_config(path)
    assert cfg.params == OregonatorParams(phi=0.07) and cfg.seed == 4
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.ini")
