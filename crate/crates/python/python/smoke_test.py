"""Quick end-to-end check of the Python bindings."""
import json
import math
import tempfile
from pathlib import Path

import chansim


def main():
    assert "tdl-a" in chansim.bundled_profiles()
    assert json.loads(chansim.profile_json("cdl-a"))["name"]

    ds = chansim.generate_tdl("tdl-a", 2000, 1, 12, 4, 60.0, 0.25, 800.0, delay_spread_ns=30.0)
    ds, scale = ds.normalized()
    assert (ds.count, ds.dim) == (2000, 48) and scale > 0
    assert math.isclose(ds.mean_square_norm(), 48.0, rel_tol=1e-9)

    cov = chansim.sample_cov(ds)
    assert math.isclose(cov.trace, 48.0, rel_tol=1e-9)

    pca = chansim.pca_fit(cov, 8)
    err = chansim.nmse(ds, pca.roundtrip(ds))
    assert math.isclose(err, pca.analytic_nmse(), rel_tol=1e-6, abs_tol=1e-12), (err, pca.analytic_nmse())

    s2 = chansim.snr_to_noise_var(10.0)
    y = chansim.noisy_observations(ds, s2, 2)
    est = chansim.lmmse_fit(cov, s2).estimate(y)
    assert chansim.nmse(ds, est) < chansim.nmse(ds, y)

    mimo = chansim.generate_cdl("cdl-a", 3000, 3, 4, 4, 3.5)
    mimo, _ = mimo.normalized()
    report = chansim.gaussianity_report(mimo, snr_db=20.0, seed=4)
    assert report.verdict in ("consistent-with-gaussian", "non-gaussian")
    assert json.loads(report.to_json())["verdict"] == report.verdict

    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "x.chds"
        ds.write(str(path))
        back = chansim.Dataset.read(str(path))
        assert back.rows() == ds.rows()

    small = chansim.Dataset([[1 + 0j, 0j], [0j, 1j]])
    assert small.sample(1) == [0j, 1j]
    print("smoke test passed:", ds, mimo, report.verdict)


if __name__ == "__main__":
    main()
