"""
Tests for the prior densities and the unconstrained parameter maps.
"""

import math

import numpy as np
import pytest
from scipy import integrate, stats

from econometrics.errors import ConfigError
from econometrics.priors import (
    DEFAULT_PRIORS,
    Ar2Component,
    ParameterSpace,
    ScalarComponent,
    SimplexComponent,
    TruncatedNormalSimplexComponent,
    build_space,
    conjugate_state_priors,
    prior_logpdf,
)
from models.volatility import (
    MODEL_MENU,
    PersistencePrior,
    PriorConfig,
    PriorKind,
    ScalarPrior,
    VolatilityModelSpec,
)


def _numeric_log_jacobian(space, z, h=1e-6):
    d = len(z)
    jac = np.empty((d, d))
    for j in range(d):
        step = np.zeros(d)
        step[j] = h
        jac[:, j] = (space.to_natural(z + step) - space.to_natural(z - step)) / (2.0 * h)
    return math.log(abs(np.linalg.det(jac)))


@pytest.mark.parametrize("name", list(DEFAULT_PRIORS))
def test_default_priors_integrate_to_one(name):
    prior = DEFAULT_PRIORS[name]

    def density(x):
        return math.exp(float(prior_logpdf(prior, x)))

    if prior.kind == PriorKind.NORMAL:
        total, _ = integrate.quad(density, -math.inf, math.inf)
    elif prior.upper is not None:
        total, _ = integrate.quad(density, prior.lower, prior.upper, limit=200)
    else:
        lower = prior.lower or 0.0
        near, _ = integrate.quad(density, lower, lower + 5.0, points=[lower + 0.05, lower + 0.5], limit=200)
        far, _ = integrate.quad(density, lower + 5.0, math.inf, limit=200)
        total = near + far
    assert total == pytest.approx(1.0, abs=1e-4)


def test_prior_support():
    nu = DEFAULT_PRIORS["nu"]
    assert prior_logpdf(nu, 1.5) == -math.inf
    assert np.isfinite(prior_logpdf(nu, 2.5))
    assert prior_logpdf(DEFAULT_PRIORS["sigma_h"], -0.1) == -math.inf
    assert prior_logpdf(DEFAULT_PRIORS["kappa"], 0.2) == -math.inf


@pytest.mark.parametrize(
    "prior",
    [
        ScalarPrior(kind=PriorKind.NORMAL, a=1.0, b=4.0),
        ScalarPrior(kind=PriorKind.SHIFTED_GAMMA, a=2.0, b=0.1, lower=2.0),
        ScalarPrior(kind=PriorKind.SCALED_BETA, a=20.0, b=1.5, lower=-1.0, upper=1.0),
    ],
)
def test_scalar_component_maps(prior):
    space = ParameterSpace([ScalarComponent("x", prior)])
    for z in (-2.0, 0.3, 1.7):
        vec = np.array([z])
        assert space.from_natural(space.to_natural(vec))[0] == pytest.approx(z, abs=1e-9)
        assert space.log_jacobian(vec) == pytest.approx(_numeric_log_jacobian(space, vec), abs=1e-5)


def test_simplex_component_stays_stationary():
    comp = SimplexComponent(["alpha1", "beta1", "gamma"], [1.0, 1.0, 0.5])
    space = ParameterSpace([comp])
    z = np.random.default_rng(0).normal(scale=2.0, size=(500, 3))
    x = space.to_natural(z)
    assert np.all(x > 0.0)
    assert np.all(x[:, 0] + x[:, 1] + 0.5 * x[:, 2] < 1.0)
    np.testing.assert_allclose(space.from_natural(x), z, atol=1e-8)


def test_simplex_component_density():
    # Uniform on the triangle alpha1 + beta1 < 1 has density 2.
    space = ParameterSpace([SimplexComponent(["alpha1", "beta1"], [1.0, 1.0])])
    assert space.log_prior(np.array([0.2, 0.5])) == pytest.approx(math.log(2.0))
    assert space.log_prior(np.array([0.6, 0.5])) == -math.inf
    gjr = ParameterSpace([SimplexComponent(["alpha1", "beta1", "gamma"], [1.0, 1.0, 0.5])])
    assert gjr.log_prior(np.array([0.1, 0.5, 0.2])) == pytest.approx(math.log(3.0))
    z = np.array([0.4, 1.2, -0.5])
    assert gjr.log_jacobian(z) == pytest.approx(_numeric_log_jacobian(gjr, z), abs=1e-5)


def test_truncated_normal_persistence_prior_integrates_to_one():
    garch = ParameterSpace([TruncatedNormalSimplexComponent(["alpha1", "beta1"], [1.0, 1.0], [0.1, 0.8], 1.0)])
    total, _ = integrate.dblquad(
        lambda alpha1, beta1: math.exp(garch.log_prior(np.array([alpha1, beta1]))),
        0.0,
        1.0,
        lambda beta1: 0.0,
        lambda beta1: 1.0 - beta1,
    )
    assert total == pytest.approx(1.0, abs=1e-6)

    gjr = ParameterSpace(
        [TruncatedNormalSimplexComponent(["alpha1", "beta1", "gamma"], [1.0, 1.0, 0.5], [0.1, 0.8, 0.0], 0.25)]
    )
    total, _ = integrate.tplquad(
        lambda alpha1, beta1, gamma: math.exp(gjr.log_prior(np.array([alpha1, beta1, gamma]))),
        0.0,
        2.0,
        lambda gamma: 0.0,
        lambda gamma: 1.0 - 0.5 * gamma,
        lambda gamma, beta1: 0.0,
        lambda gamma, beta1: 1.0 - beta1 - 0.5 * gamma,
        epsabs=1e-9,
    )
    assert total == pytest.approx(1.0, abs=1e-5)


def test_truncated_normal_persistence_prior_shape():
    comp = TruncatedNormalSimplexComponent(["alpha1", "beta1"], [1.0, 1.0], [0.1, 0.8], 1.0)
    space = ParameterSpace([comp])
    near, far = np.array([0.1, 0.8]), np.array([0.6, 0.1])
    assert space.log_prior(near) > space.log_prior(far)
    ratio = space.log_prior(near) - space.log_prior(far)
    expected = stats.norm.logpdf(near, [0.1, 0.8]).sum() - stats.norm.logpdf(far, [0.1, 0.8]).sum()
    assert ratio == pytest.approx(expected)
    assert space.log_prior(np.array([0.6, 0.5])) == -math.inf
    assert space.log_prior(np.array([-0.1, 0.5])) == -math.inf
    z = np.array([0.4, 1.2])
    assert space.log_jacobian(z) == pytest.approx(_numeric_log_jacobian(space, z), abs=1e-5)


def test_persistence_prior_is_configurable():
    spec = VolatilityModelSpec.from_name("GARCH-GJR")
    default = build_space(spec).component_of("alpha1")
    assert isinstance(default, TruncatedNormalSimplexComponent)
    assert default.names == ["alpha1", "beta1", "gamma"]
    uniform = build_space(spec, PriorConfig(persistence=PersistencePrior.UNIFORM)).component_of("beta1")
    assert type(uniform) is SimplexComponent
    wide = build_space(spec, PriorConfig(persistence_variance=100.0)).component_of("gamma")
    assert wide.sd == pytest.approx(10.0)
    # A very wide truncated normal is close to flat on the region.
    point = np.array([[0.2, 0.3, 0.4]])
    assert wide.log_prior(point)[0] == pytest.approx(uniform.log_prior(point)[0], abs=0.01)


def test_ar2_component_covers_triangle():
    space = ParameterSpace([Ar2Component(["phi", "phi2"])])
    z = np.random.default_rng(1).normal(scale=1.5, size=(500, 2))
    x = space.to_natural(z)
    phi1, phi2 = x[:, 0], x[:, 1]
    assert np.all(np.abs(phi2) < 1.0)
    assert np.all(phi1 + phi2 < 1.0)
    assert np.all(phi2 - phi1 < 1.0)
    np.testing.assert_allclose(space.from_natural(x), z, atol=1e-8)
    point = np.array([0.3, -0.4])
    assert space.log_jacobian(point) == pytest.approx(_numeric_log_jacobian(space, point), abs=1e-5)


def test_ar2_prior_is_normalised():
    space = ParameterSpace([Ar2Component(["phi", "phi2"])])
    total, _ = integrate.dblquad(
        lambda phi1, phi2: math.exp(space.log_prior(np.array([phi1, phi2]))),
        -1.0,
        1.0,
        lambda phi2: phi2 - 1.0,
        lambda phi2: 1.0 - phi2,
    )
    assert total == pytest.approx(1.0, abs=1e-6)
    assert space.log_prior(np.array([0.9, 0.2])) == -math.inf


@pytest.mark.parametrize("name", list(MODEL_MENU))
def test_build_space_matches_parameter_order(name):
    spec = VolatilityModelSpec.from_name(name)
    space = build_space(spec)
    assert space.names == spec.param_names
    z = np.random.default_rng(2).normal(size=space.dim)
    x = space.to_natural(z)
    assert np.isfinite(space.log_density_z(z))
    np.testing.assert_allclose(space.from_natural(x), z, atol=1e-7)
    assert space.log_density_z(z) == pytest.approx(space.log_prior(x) + space.log_jacobian(z))


def test_prior_overrides():
    spec = VolatilityModelSpec.from_name("GARCH")
    tight = ScalarPrior(kind=PriorKind.NORMAL, a=0.0, b=0.01)
    space = build_space(spec, PriorConfig(overrides={"mu": tight}))
    assert space.component_of("mu").prior == tight
    with pytest.raises(ConfigError):
        build_space(spec, PriorConfig(overrides={"alpha1": tight}))
    with pytest.raises(ConfigError):
        build_space(spec, PriorConfig(overrides={"omega": tight}))


def test_conjugate_state_priors():
    sv = VolatilityModelSpec.from_name("SV")
    assert conjugate_state_priors(build_space(sv), sv) is not None
    lev = VolatilityModelSpec.from_name("SV-L")
    assert conjugate_state_priors(build_space(lev), lev) is None
    garch = VolatilityModelSpec.from_name("GARCH")
    assert conjugate_state_priors(build_space(garch), garch) is None
    flat = ScalarPrior(kind=PriorKind.UNIFORM, lower=-5.0, upper=5.0)
    assert conjugate_state_priors(build_space(sv, PriorConfig(overrides={"mu_h": flat})), sv) is None


def test_scalar_prior_validation():
    with pytest.raises(ValueError):
        ScalarPrior(kind=PriorKind.TRUNCATED_NORMAL, a=1.0, b=10.0, lower=2.0, upper=1.0)
    with pytest.raises(ValueError):
        ScalarPrior(kind=PriorKind.UNIFORM, lower=1.0, upper=0.0)
    with pytest.raises(ValueError):
        ScalarPrior(kind=PriorKind.NORMAL, b=-1.0)
