from multiscale_rg.verify import run_verify

SMALL = {"rg_n_max": 4, "flow_n_max": 3, "fractional_n_max": 4, "fractional_problems": 5,
         "staircase_count": 10, "fixed_point_maps": 3, "fixed_point_k_max": 6,
         "nonuniqueness_n": [6], "stochastic_n_max": 2, "stochastic_samples": 1000}


def test_all_suites_pass_at_small_sizes():
    results = run_verify(SMALL, seed=1)
    assert all(r.passed for r in results), [r.to_dict() for r in results if not r.passed]
    names = {r.name for r in results}
    assert "nonuniqueness" in names and "blowup_staircase" in names


def test_corrupted_coupling_is_caught():
    results = run_verify(SMALL, fault={"model": "A", "f": [0, 0, 1, 1]})
    bad = [r for r in results if not r.passed]
    assert bad and all(r.name.startswith("rg_commutation[A") for r in bad)
    assert bad[0].counterexample["input"] is not None


def test_nonuniqueness_report_has_witnesses():
    r = next(r for r in run_verify(SMALL) if r.name == "nonuniqueness")
    pair = r.details["pairs"][6]
    assert pair["first_disagreement"] == [6, 33, 6]
    cut, pinned = pair["witnesses"]
    assert len(cut) == len(pinned) and cut != pinned
