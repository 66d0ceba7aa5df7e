import math

import pytest

import epinuts

SCENARIO = """seed=5
psi=8
effect.lockdown=0.6
days=80
seed_infections=30
country=North
lockdown=2020-03-18
country=South
lockdown=2020-03-22
"""


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("sim")
    scenario = root / "scenario.txt"
    scenario.write_text(SCENARIO)
    code, out, err = epinuts.run_cli(["simulate", str(scenario), "--output-dir", str(root / "data")])
    assert code == 0, err
    return root / "data"


@pytest.fixture(scope="module")
def model(data_dir):
    return epinuts.Model(
        str(data_dir / "deaths.csv"),
        str(data_dir / "interventions.csv"),
        str(data_dir / "country_meta.csv"),
    )


def test_delay_pmfs_sum_to_one():
    g = epinuts.generation_pmf()
    pi = epinuts.infection_to_death_pmf()
    assert len(g) == 100 and len(pi) == 150
    assert abs(sum(g) - 1.0) < 1e-4
    assert abs(sum(pi) - 1.0) < 1e-4
    mean = sum((i + 1) * w for i, w in enumerate(pi))
    assert abs(mean - 22.9) < 0.05


def test_negbinomial_matches_poisson_limit():
    y, mu = 7, 4.5
    poisson = y * math.log(mu) - mu - math.lgamma(y + 1)
    assert abs(epinuts.logpmf_negbinomial(y, mu, 1e8) - poisson) < 1e-6


def test_prior_effects():
    d = epinuts.prior_effects(20000, 3)
    assert len(d["joint"]) == 20000
    assert epinuts.ks_uniform(d["joint"], 1.05) < 0.02
    assert all(0.44 < p < 0.52 for p in d["p_alpha_negative"])


def test_model_shape_and_gradient(model):
    assert model.countries == ["North", "South"]
    assert model.dim == 6 + 4 * 2 + 4
    assert model.parameter_names[0] == "R0[North]"
    theta = [0.1 * ((i % 5) - 2) for i in range(model.dim)]
    names = model.parameter_names
    theta[names.index("ifr_noise[North]")] = 1.0
    theta[names.index("ifr_noise[South]")] = 1.0
    value, grad = model.gradient(theta)
    assert value == pytest.approx(model.log_density(theta), rel=1e-12)
    for i in (0, 3, 7, model.dim - 1):
        # The log density is ~1e5 here, so a larger step keeps roundoff small.
        h = 1e-4 * max(1.0, abs(theta[i]))
        up = list(theta)
        dn = list(theta)
        up[i] += h
        dn[i] -= h
        fd = (model.log_density(up) - model.log_density(dn)) / (2 * h)
        assert abs(grad[i] - fd) / max(1.0, abs(fd)) < 1e-5
    p = model.constrain(theta)
    assert len(p["alpha"]) == 6 and p["psi"] > 0


def test_bad_input_raises(tmp_path, data_dir):
    bad = tmp_path / "deaths.csv"
    bad.write_text("country,date,deaths\nNorth,2020-02-01,-3\n")
    with pytest.raises(ValueError):
        epinuts.Model(str(bad), str(data_dir / "interventions.csv"), str(data_dir / "country_meta.csv"))


def test_short_sample_and_summary(model):
    out = model.sample(chains=1, warmup=150, iters=20, seed=2)
    draws = out["draws"]
    assert len(draws) == 1 and len(draws[0]) == 20 and len(draws[0][0]) == model.dim
    text = epinuts.summarize(out["names"], draws)
    assert text.startswith("parameter,mean,sd,q5,q50,q95,rhat,ess_bulk,note\n")
    assert "single chain" in text
