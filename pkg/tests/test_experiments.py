"""Sweep engine: grid order, paired draws, worker equivalence, presets."""

from dataclasses import replace

import numpy as np
import pytest

from offbeat.evaluation import MethodSpec
from offbeat.experiments import (
    PI_GRID,
    SIGMA_GRID,
    SweepConfig,
    preset_naive_quality,
    preset_noiseless,
    preset_pi_sweep,
    preset_sigma_sweep,
    run_sweep,
)
from offbeat.learning import FitConfig
from offbeat.synth import GenConfig


def tiny_config(methods=(), sigmas=(0.5, 2.0), seeds=(0, 1), folds=2, **kwargs):
    gen = GenConfig(
        sessions=4,
        instances_per_session=(25, 35),
        positive_rate=0.15,
        class_separation=3.5,
        seed=0,
    )
    return SweepConfig(
        gen=gen, sigmas=sigmas, methods=methods, folds=folds, seeds=seeds, **kwargs
    )


class TestSweepConfig:
    def test_cells_order(self):
        config = tiny_config(sigmas=(0.5, 2.0), seeds=(0, 1))
        assert config.cells() == (
            (0.5, 1.0, 0),
            (0.5, 1.0, 1),
            (2.0, 1.0, 0),
            (2.0, 1.0, 1),
        )

    @pytest.mark.parametrize(
        "kwargs,fragment",
        [
            ({"sigmas": ()}, "sigmas"),
            ({"sigmas": (0.0,)}, "sigmas"),
            ({"pis": (1.2,)}, "pis"),
            ({"pi_neg": -0.2}, "pi_neg"),
            ({"seeds": ()}, "seeds"),
            ({"folds": 1}, "folds"),
        ],
    )
    def test_validation(self, kwargs, fragment):
        with pytest.raises(ValueError, match=fragment):
            tiny_config(**kwargs)


class TestRunSweep:
    def test_naive_quality_only(self):
        report = run_sweep(tiny_config())
        # One naive-label row per cell, no training rows.
        assert len(report) == 4
        assert all(row.method == "naive_labels" for row in report.rows)
        assert all(row.fold == -1 for row in report.rows)
        for (sigma, pi, seed), row in zip(tiny_config().cells(), report.rows):
            assert (row.sigma, row.pi, row.seed) == (sigma, pi, seed)

    def test_row_cardinality_with_methods(self):
        config = tiny_config(methods=(MethodSpec("lrn"), MethodSpec("supervised")))
        report = run_sweep(config)
        # Per cell: 1 naive row + 2 methods x 2 folds.
        assert len(report) == len(config.cells()) * (1 + 2 * 2)
        lrn = report.select(method="lrn")
        assert len(lrn) == len(config.cells()) * 2
        assert all(row.sigma in (0.5, 2.0) for row in lrn)

    def test_naive_quality_can_be_disabled(self):
        config = tiny_config(methods=(MethodSpec("lrn"),), naive_quality=False)
        report = run_sweep(config)
        assert all(row.method == "lrn" for row in report.rows)

    def test_naive_quality_degrades_with_sigma(self):
        config = tiny_config(sigmas=(0.25, 4.0), seeds=(0, 1, 2))
        report = run_sweep(config)
        mean_f1 = lambda sigma: np.mean(
            [row.f1 for row in report.select(method="naive_labels", sigma=sigma)]
        )
        assert mean_f1(0.25) > mean_f1(4.0)

    def test_paired_draws_share_ground_truth(self):
        # The same seed at two sigmas must corrupt the same base dataset:
        # with sigma tiny and pi = 1 the naive labels are perfect, so recall
        # 1.0 certifies the draw; the other cell shares it by construction.
        config = tiny_config(sigmas=(1e-9, 3.0), seeds=(5,))
        report = run_sweep(config)
        clean = report.select(method="naive_labels", sigma=1e-9)[0]
        assert clean.precision == 1.0 and clean.recall == 1.0

    def test_workers_match_inline(self):
        config = tiny_config(methods=(MethodSpec("lrn"),), seeds=(0, 1))
        inline = run_sweep(config, workers=1)
        pooled = run_sweep(config, workers=2)
        assert len(inline) == len(pooled)
        for a, b in zip(inline.rows, pooled.rows):
            # Everything but the measured wall time is deterministic.
            assert replace(a, wall_time=0.0) == replace(b, wall_time=0.0)


class TestPresets:
    def test_noiseless(self):
        config = preset_noiseless()
        assert config.sigmas == (0.01,)
        assert config.pis == (1.0,)
        assert [m.name for m in config.methods] == ["lrm", "supervised"]
        assert config.folds == 10
        # Ten-fold CV needs at least ten sessions.
        assert config.gen.sessions >= config.folds

    def test_sigma_sweep(self):
        config = preset_sigma_sweep(num_seeds=12)
        assert config.sigmas == SIGMA_GRID
        assert {1.0, 2.0, 5.0} <= set(config.sigmas)
        assert [m.name for m in config.methods] == ["lrm", "lrn"]
        assert config.seeds == tuple(range(12))

    def test_pi_sweep(self):
        config = preset_pi_sweep(num_seeds=3)
        assert config.pis == PI_GRID
        assert 0.7 in config.pis
        assert config.coupled
        assert [m.name for m in config.methods] == ["lrm", "mi", "lrn"]

    def test_naive_quality(self):
        config = preset_naive_quality(num_seeds=2)
        assert config.methods == ()
        assert config.naive_quality
        assert 2.0 in config.sigmas
        # Long bursts: the interior of an episode keeps its naive labels.
        assert config.gen.burst_length >= 20
