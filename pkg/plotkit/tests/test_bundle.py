"""Bundle loading and schema validation."""
import json

import pytest

from plotkit.bundle import Bundle, BundleError, load_bundle


def test_load_synthetic_bundle(synthetic_bundle):
    b = load_bundle(synthetic_bundle)
    assert b.labels == ["SCR", "MCB-K2", "MCB-K50"]
    assert len(b.curves) == 30
    assert all(isinstance(r["sr"], float) for r in b.curves)
    steps, mean, std = b.summary_series("SCR", "sr")
    assert steps == [1000, 2000, 3000, 4000, 5000]
    assert mean[0] == pytest.approx(0.05)


def test_missing_manifest_rejected(tmp_path):
    with pytest.raises(BundleError, match="manifest"):
        load_bundle(tmp_path)


def test_wrong_schema_rejected(tmp_path):
    (tmp_path / "manifest.json").write_text(json.dumps(
        {"schema_version": 99}))
    with pytest.raises(BundleError, match="schema"):
        load_bundle(tmp_path)


def test_missing_column_rejected(synthetic_bundle, tmp_path):
    import shutil

    broken = tmp_path / "broken"
    shutil.copytree(synthetic_bundle, broken)
    curves = (broken / "curves.csv").read_text().splitlines()
    header = curves[0].replace(",sr", ",success")
    (broken / "curves.csv").write_text("\n".join([header] + curves[1:]))
    with pytest.raises(BundleError, match="lacks columns"):
        load_bundle(broken)


def test_unknown_metric_rejected(synthetic_bundle):
    b = load_bundle(synthetic_bundle)
    with pytest.raises(BundleError, match="metric"):
        b.summary_series("SCR", "wins")


def test_seed_series_grouping(synthetic_bundle):
    b = load_bundle(synthetic_bundle)
    series = b.seed_series("MCB", 2, None, "sr")
    assert set(series) == {0, 1}
    assert series[0][0] == (1000, 0.2)
