"""Tests for scenario configuration, layouts and scenario files."""

import math
from pathlib import Path

import numpy as np
import pytest

from toc_manager.scenario.loader import apply_overrides, load_scenario, parse_overrides, save_scenario
from toc_manager.scenario.scenario import (
    CavOption,
    DenmVariant,
    EmergencyLaneOccupancy,
    InvalidLayoutError,
    Placement,
    RsuOption,
    ScenarioConfig,
    ScenarioError,
    Scheme,
    enumerate_layouts,
    enumerate_windows,
    first_spot_encounter,
    random_layout,
)

DEFAULT_SCENARIO = Path(__file__).parent.parent / "scenarios" / "default.scenario"


@pytest.fixture
def cfg():
    return ScenarioConfig()


class TestScenarioConfig:
    def test_defaults_are_valid(self, cfg):
        assert cfg.validate() == []
        assert cfg.n_windows == 18
        assert cfg.spot_length == 75.0

    def test_window_edges(self, cfg):
        assert cfg.near_edge(0) == 0.0
        assert cfg.far_edge(0) == 75.0
        assert cfg.far_edge(17) == 500.0

    def test_relevance_must_match_grid(self, cfg):
        problems = ScenarioConfig(relevance_distance=400.0).validate()
        assert any("relevance_distance" in p for p in problems)

    def test_field_level_problems(self):
        bad = ScenarioConfig(spot_count=3, y_margin=-1.0, p_loss=2.0, timestep=0.0)
        with pytest.raises(ScenarioError) as exc:
            bad.ensure_valid()
        fields = " ".join(exc.value.problems)
        for name in ("spot_count", "y_margin", "p_loss", "timestep"):
            assert name in fields

    def test_explicit_placement_needs_matching_windows(self):
        problems = ScenarioConfig(placement=Placement.EXPLICIT, explicit_windows=(1, 5)).validate()
        assert problems

    def test_variant_labels(self, cfg):
        assert cfg.variant == "zero"
        mcm = cfg.with_overrides(scheme=Scheme.MCM, mcm_rsu_option=RsuOption.DISTR_TOC,
                                 mcm_cav_option=CavOption.CAV_DECISION)
        assert mcm.variant == "distr_toc_cav"

    def test_denm_search_extents(self):
        assert DenmVariant.ZERO.extra_search == 0.0
        assert DenmVariant.FIFTY.extra_search == 50.0
        assert DenmVariant.UNLIMITED.extra_search is None


class TestLayouts:
    def test_one_spot_enumeration(self, cfg):
        layouts = enumerate_layouts(cfg)
        assert len(layouts) == 18
        assert [l.windows for l in layouts] == [(k,) for k in enumerate_windows(cfg)]

    def test_two_spot_enumeration(self, cfg):
        layouts = enumerate_layouts(cfg.with_overrides(spot_count=2))
        assert len(layouts) == 120
        for layout in layouts:
            a, b = layout.windows
            assert b - a >= 3
            assert sum(layout.free) == 6

    def test_free_sections_are_union_of_windows(self, cfg):
        occ = EmergencyLaneOccupancy.from_windows((3, 10), cfg)
        assert [j for j, f in enumerate(occ.free) if f] == [3, 4, 5, 10, 11, 12]
        assert occ.layout_id == "3-10"

    def test_touching_windows_merge(self, cfg):
        occ = EmergencyLaneOccupancy.from_windows((2, 5), cfg)
        assert occ.run_start(7) == 2

    def test_overlapping_windows_rejected(self, cfg):
        with pytest.raises(InvalidLayoutError):
            EmergencyLaneOccupancy.from_windows((2, 4), cfg)
        with pytest.raises(InvalidLayoutError):
            EmergencyLaneOccupancy.from_windows((18,), cfg)

    def test_section_at_boundaries(self, cfg):
        occ = EmergencyLaneOccupancy.from_windows((0,), cfg)
        assert occ.section_at(75.0) == 2
        assert occ.section_at(75.1) == 3
        assert occ.section_at(0.01) == 0

    def test_random_layout_is_reproducible(self, cfg):
        a = random_layout(cfg, np.random.default_rng(5))
        b = random_layout(cfg, np.random.default_rng(5))
        assert a == b

    def test_random_layout_is_uniform(self, cfg):
        rng = np.random.default_rng(11)
        counts = np.zeros(cfg.n_windows)
        for _ in range(18_000):
            counts[random_layout(cfg, rng).windows[0]] += 1
        assert np.all(np.abs(counts / 18_000 - 1 / 18) < 0.01)


class TestFirstSpotEncounter:
    def test_alongside_free_section(self, cfg):
        occ = EmergencyLaneOccupancy.from_windows((5,), cfg)
        encounter_x, clearance = first_spot_encounter(183.33, occ, cfg)
        assert encounter_x == 183.33
        assert clearance == pytest.approx(58.33)

    def test_free_run_below(self, cfg):
        occ = EmergencyLaneOccupancy.from_windows((2,), cfg)
        assert first_spot_encounter(300.0, occ, cfg) == (125.0, 75.0)

    def test_nothing_ahead(self, cfg):
        occ = EmergencyLaneOccupancy.from_windows((17,), cfg)
        assert first_spot_encounter(300.0, occ, cfg) is None

    def test_negative_position(self, cfg):
        occ = EmergencyLaneOccupancy.from_windows((0,), cfg)
        with pytest.raises(ValueError):
            first_spot_encounter(-1.0, occ, cfg)


class TestScenarioFiles:
    def test_default_file_matches_defaults(self):
        assert load_scenario(DEFAULT_SCENARIO) == ScenarioConfig()

    def test_save_and_load(self, tmp_path):
        cfg = ScenarioConfig(scheme=Scheme.MCM, spot_count=2, placement=Placement.EXPLICIT,
                             explicit_windows=(3, 10), mcm_rsu_option=RsuOption.DISTR_TOC,
                             p_loss=0.25)
        path = tmp_path / "custom.scenario"
        save_scenario(cfg, path)
        assert load_scenario(path) == cfg

    def test_comments_and_partial_files(self, tmp_path):
        path = tmp_path / "partial.scenario"
        path.write_text("# only a few keys\nscheme = mcm  # inline\n\nmax_toc_range = 700\n")
        cfg = load_scenario(path)
        assert cfg.scheme == Scheme.MCM
        assert cfg.max_toc_range == 700.0
        assert cfg.s_len == 25.0

    def test_infinite_range(self, tmp_path):
        path = tmp_path / "inf.scenario"
        path.write_text("comm_range = inf\n")
        assert math.isinf(load_scenario(path).comm_range)

    def test_unknown_key_and_bad_value(self, tmp_path):
        path = tmp_path / "bad.scenario"
        path.write_text("colour = blue\nscheme = carrier_pigeon\nlonely line\n")
        with pytest.raises(ScenarioError) as exc:
            load_scenario(path)
        assert len(exc.value.problems) == 1
        path.write_text("colour = blue\nscheme = carrier_pigeon\n")
        with pytest.raises(ScenarioError) as exc:
            load_scenario(path)
        assert len(exc.value.problems) == 2

    def test_missing_file(self, tmp_path):
        with pytest.raises(ScenarioError):
            load_scenario(tmp_path / "absent.scenario")

    def test_parse_explicit_placement(self):
        values = parse_overrides({"placement": "3, 10"})
        assert values["placement"] == Placement.EXPLICIT
        assert values["explicit_windows"] == (3, 10)

    def test_apply_overrides_mixes_raw_and_typed(self, cfg):
        new = apply_overrides(cfg, scheme="mcm", spot_count=2, y_margin=None)
        assert new.scheme == Scheme.MCM
        assert new.spot_count == 2
        assert new.y_margin == cfg.y_margin

    def test_apply_overrides_validates(self, cfg):
        with pytest.raises(ScenarioError):
            apply_overrides(cfg, p_loss="1.5")
