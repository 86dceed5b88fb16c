"""Schedule, score providers, samplers, DDIM inversion, relighting."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from lumiguide import ccr, diffusion, energy, illum, imgcore, scenegen
from lumiguide.errors import ParameterError, SamplingDivergence, ShapeError


class BrokenScore(diffusion.ScoreProvider):
    def score(self, x, t):
        out = np.full_like(np.asarray(x, dtype=np.float64), np.inf)
        return out


def left_prompt():
    return illum.LightPrompt(
        components=(
            illum.GaussianSpot(alpha=1.0, mu=(16.0, 4.0), sigma=((160.0, 0.0), (0.0, 90.0))),
        ),
        base=0.2,
    )


class TestVpSchedule:
    def test_endpoint_values(self):
        sched = diffusion.VpSchedule()
        assert sched.mean_factor(0.0) == 1.0
        assert sched.variance(0.0) == 0.0

    def test_mean_factor_matches_quadrature_of_beta(self):
        # independent oracle: m(t) = exp(-0.5 * integral of beta)
        sched = diffusion.VpSchedule(beta_min=0.1, beta_max=20.0)
        for t in (0.25, 0.5, 1.0):
            integral, _ = quad(sched.beta, 0.0, t)
            assert sched.mean_factor(t) == pytest.approx(math.exp(-0.5 * integral), rel=1e-10)

    def test_monotone(self):
        sched = diffusion.VpSchedule()
        ts = np.linspace(0.0, 1.0, 101)
        ms = np.array([sched.mean_factor(t) for t in ts])
        vs = np.array([sched.variance(t) for t in ts])
        assert np.all(np.diff(ms) < 0)
        assert np.all(np.diff(vs) > 0)
        assert 0.0 < vs[-1] < 1.0

    def test_validation(self):
        with pytest.raises(ParameterError):
            diffusion.VpSchedule(beta_min=0.0)
        with pytest.raises(ParameterError):
            diffusion.VpSchedule(beta_min=2.0, beta_max=1.0)
        with pytest.raises(ParameterError):
            diffusion.VpSchedule(steps=-1)


class TestPerturb:
    def test_t_zero_returns_input_exactly(self):
        rng = np.random.default_rng(0)
        x0 = rng.uniform(size=(4, 4, 3))
        out = diffusion.perturb(x0, 0.0, diffusion.VpSchedule(), rng)
        assert np.array_equal(out, x0)

    def test_t_one_is_nearly_pure_noise(self):
        sched = diffusion.VpSchedule(beta_min=0.1, beta_max=20.0)
        # direct evaluation of the exponent integral: 0.25 * 19.9 + 0.05
        assert sched.mean_factor(1.0) == pytest.approx(math.exp(-5.025), rel=1e-12)
        assert sched.mean_factor(1.0) < 0.007

    def test_moments_match_kernel(self):
        sched = diffusion.VpSchedule()
        rng = np.random.default_rng(5)
        x0 = rng.uniform(0.1, 0.9, (4, 4, 3))
        n = 100_000
        for t in (0.25, 0.5, 0.75):
            m, v = sched.mean_factor(t), sched.variance(t)
            z = rng.standard_normal((n,) + x0.shape)
            draws = m * x0 + math.sqrt(v) * z
            se = math.sqrt(v / n)
            assert np.abs(draws.mean(axis=0) - m * x0).max() < 4.0 * se
            assert np.abs(draws.var(axis=0) - v).max() < 0.05 * v

    def test_time_out_of_range(self):
        rng = np.random.default_rng(1)
        with pytest.raises(ParameterError):
            diffusion.perturb(np.zeros((2, 2, 3)), 1.5, diffusion.VpSchedule(), rng)


class TestEmpiricalScore:
    def test_single_image_dataset_has_gaussian_score(self):
        sched = diffusion.VpSchedule()
        a = np.random.default_rng(2).uniform(size=(3, 3, 3))
        prov = diffusion.EmpiricalScore([a], sched)
        x = np.random.default_rng(3).normal(size=(3, 3, 3))
        t = 0.37
        m, v = sched.mean_factor(t), sched.variance(t)
        expected = (m * a - x) / v
        assert np.abs(prov.score(x, t) - expected).max() < 1e-12

    def test_symmetric_dataset_cancels_perpendicular_component(self):
        sched = diffusion.VpSchedule()
        a = np.array([[[0.2], [0.8]]])
        b = np.array([[[0.8], [0.2]]])
        prov = diffusion.EmpiricalScore([a, b], sched)
        x = np.array([[[0.5], [0.5]]])  # equidistant from both
        s = prov.score(x, 0.5)
        # the symmetry axis is the diagonal: both components must be equal
        assert s[0, 0, 0] == pytest.approx(s[0, 1, 0], abs=1e-12)

    def test_matches_finite_differences_of_log_density(self):
        sched = diffusion.VpSchedule()
        data = [
            np.array([[[0.2], [0.8]]]),
            np.array([[[0.5], [0.3]]]),
            np.array([[[0.9], [0.1]]]),
        ]
        prov = diffusion.EmpiricalScore(data, sched)
        x = np.array([[[0.4], [0.45]]])
        for t in (0.3, 0.5, 0.9):
            s = prov.score(x, t)
            h = 1e-5
            fd = np.zeros_like(x)
            for idx in range(x.size):
                xp = x.copy()
                xp.flat[idx] += h
                xm = x.copy()
                xm.flat[idx] -= h
                fd.flat[idx] = (prov.log_density(xp, t) - prov.log_density(xm, t)) / (2 * h)
            assert np.linalg.norm(s - fd) / np.linalg.norm(fd) < 1e-5

    def test_score_at_time_zero_rejected(self):
        prov = diffusion.EmpiricalScore([np.zeros((2, 2, 3))], diffusion.VpSchedule())
        with pytest.raises(ParameterError):
            prov.score(np.zeros((2, 2, 3)), 0.0)

    def test_empty_dataset_rejected(self):
        with pytest.raises(ParameterError):
            diffusion.EmpiricalScore([], diffusion.VpSchedule())

    def test_mixed_shapes_rejected(self):
        with pytest.raises(ShapeError):
            diffusion.EmpiricalScore(
                [np.zeros((2, 2, 3)), np.zeros((3, 3, 3))], diffusion.VpSchedule()
            )


class TestTweedie:
    def test_point_mass_recovers_the_point(self):
        sched = diffusion.VpSchedule()
        a = np.random.default_rng(4).uniform(size=(3, 3, 3))
        prov = diffusion.EmpiricalScore([a], sched)
        x = np.random.default_rng(5).normal(size=(3, 3, 3))
        for t in (0.1, 0.5, 1.0):
            assert np.abs(diffusion.tweedie_denoise(x, t, prov, sched) - a).max() < 1e-10

    def test_t_zero_returns_input(self):
        sched = diffusion.VpSchedule()
        prov = diffusion.EmpiricalScore([np.zeros((2, 2, 3))], sched)
        x = np.random.default_rng(6).normal(size=(2, 2, 3))
        assert np.array_equal(diffusion.tweedie_denoise(x, 0.0, prov, sched), x)

    def test_near_point_dominates_at_small_time(self):
        sched = diffusion.VpSchedule()
        a = np.full((2, 2, 3), 0.2)
        b = np.full((2, 2, 3), 0.8)
        prov = diffusion.EmpiricalScore([a, b], sched)
        t = 0.05
        x = sched.mean_factor(t) * a + 0.01
        assert np.abs(diffusion.tweedie_denoise(x, t, prov, sched) - a).max() < 1e-3


class TestReverseSampler:
    def test_zero_guidance_is_bitwise_identical_to_none(self):
        sched = diffusion.VpSchedule(steps=50)
        prov = diffusion.GaussianScore(np.full((4, 4, 3), 0.5), 0.04, sched)
        inactive = energy.GuidanceConfig(lambda_i=0.0, lambda_r=0.0)
        a = diffusion.reverse_sample_guided(prov, sched, (4, 4, 3), 123, None)
        b = diffusion.reverse_sample_guided(prov, sched, (4, 4, 3), 123, inactive)
        assert np.array_equal(a.final, b.final)
        assert b.energy_trace is None

    def test_single_gaussian_moments(self):
        # smaller sibling of the acceptance run: 64 chains, 200 steps
        sched = diffusion.VpSchedule(steps=200)
        mean = np.full((4, 4, 3), 0.6)
        prov = diffusion.GaussianScore(mean, 0.04, sched)
        finals = np.stack(
            [
                diffusion.reverse_sample_guided(
                    prov, sched, (4, 4, 3), diffusion.chain_seed(11, k), None
                ).final
                for k in range(64)
            ]
        )
        target_var = 0.04 + sched.variance(1.0 / 200)
        assert abs(finals.mean() - 0.6) < 0.1 * 0.6
        assert abs(finals.var(ddof=1) - target_var) < 0.2 * target_var

    def test_determinism_bitwise(self):
        sched = diffusion.VpSchedule(steps=30)
        prov = diffusion.GaussianScore(np.full((3, 3, 3), 0.4), 0.09, sched)
        a = diffusion.reverse_sample_guided(prov, sched, (3, 3, 3), (7, 0), None)
        b = diffusion.reverse_sample_guided(prov, sched, (3, 3, 3), (7, 0), None)
        assert np.array_equal(a.final, b.final)

    def test_guided_run_records_trace(self, grid_dataset):
        _, _, images = grid_dataset
        sched = diffusion.VpSchedule(steps=40)
        prov = diffusion.EmpiricalScore(images, sched)
        y_s = illum.compose_prompt(left_prompt(), (32, 32))
        g = energy.GuidanceConfig(lambda_i=300.0, lambda_r=0.0, target_illum=y_s)
        run = diffusion.reverse_sample_guided(prov, sched, (32, 32, 3), 0, g)
        assert len(run.energy_trace) == 40
        t_first, breakdown = run.energy_trace[0]
        assert t_first == 1.0
        assert breakdown.total >= 0.0

    def test_divergence_reports_step(self):
        sched = diffusion.VpSchedule(steps=10)
        with pytest.raises(SamplingDivergence) as err:
            diffusion.reverse_sample_guided(BrokenScore(), sched, (2, 2, 3), 0, None)
        assert err.value.step == 0

    def test_guidance_lowers_final_illumination_error(self, grid_dataset):
        _, _, images = grid_dataset
        sched = diffusion.VpSchedule(steps=200)
        prov = diffusion.EmpiricalScore(images, sched)
        y_s = illum.compose_prompt(left_prompt(), (32, 32))
        guided_cfg = energy.GuidanceConfig(lambda_i=300.0, lambda_r=0.0, target_illum=y_s)
        meas = energy.GuidanceConfig(lambda_i=1.0, lambda_r=0.0, target_illum=y_s)
        guided, unguided = [], []
        for seed in range(4):
            key = diffusion.chain_seed(seed, 0)
            g = diffusion.reverse_sample_guided(prov, sched, (32, 32, 3), key, guided_cfg)
            u = diffusion.reverse_sample_guided(prov, sched, (32, 32, 3), key, None)
            guided.append(energy.eval_energy(np.clip(g.final, 0, 1), meas).illum_term)
            unguided.append(energy.eval_energy(np.clip(u.final, 0, 1), meas).illum_term)
        assert np.mean(guided) < np.mean(unguided)

    def test_sample_chains_threading_is_reproducible(self):
        sched = diffusion.VpSchedule(steps=20)
        prov = diffusion.GaussianScore(np.full((3, 3, 3), 0.5), 0.04, sched)
        seq = diffusion.sample_chains(prov, sched, (3, 3, 3), 5, 4, threads=1)
        par = diffusion.sample_chains(prov, sched, (3, 3, 3), 5, 4, threads=3)
        for a, b in zip(seq, par):
            assert np.array_equal(a.final, b.final)

    def test_zero_chains_rejected(self):
        sched = diffusion.VpSchedule(steps=10)
        prov = diffusion.GaussianScore(np.full((2, 2, 3), 0.5), 0.04, sched)
        with pytest.raises(ParameterError):
            diffusion.sample_chains(prov, sched, (2, 2, 3), 0, 0)


class TestDdim:
    def test_point_mass_converges_from_any_latent(self):
        sched = diffusion.VpSchedule(steps=100)
        a = np.random.default_rng(8).uniform(size=(3, 3, 3))
        prov = diffusion.EmpiricalScore([a], sched)
        latent = np.random.default_rng(9).normal(size=(3, 3, 3)) * 2.0
        out = diffusion.ddim_sample(prov, sched, latent)
        assert np.abs(out - a).max() < 1e-3

    def test_deterministic_bitwise(self, grid_dataset):
        _, _, images = grid_dataset
        sched = diffusion.VpSchedule(steps=25)
        prov = diffusion.EmpiricalScore(images, sched)
        latent = np.random.default_rng(10).normal(size=(32, 32, 3))
        assert np.array_equal(
            diffusion.ddim_sample(prov, sched, latent),
            diffusion.ddim_sample(prov, sched, latent),
        )

    def test_member_inversion_round_trip(self, grid_dataset):
        _, _, images = grid_dataset
        sched = diffusion.VpSchedule(steps=100)
        prov = diffusion.EmpiricalScore(images, sched)
        x0 = images[13]
        latent = diffusion.ddim_invert(x0, prov, sched)
        rec = diffusion.ddim_sample(prov, sched, latent)
        assert imgcore.psnr(x0, rec) > 40.0

    def test_smooth_density_round_trip_off_data(self):
        # on a smooth (broad Gaussian) density the inversion round trip works
        # for arbitrary inputs, not just data points; the error is first order
        # in the step size, so 200 steps buys comfortable headroom
        sched = diffusion.VpSchedule(steps=200)
        rng = np.random.default_rng(12)
        mean = rng.uniform(0.3, 0.7, (8, 8, 3))
        prov = diffusion.GaussianScore(mean, 0.04, sched)
        x0 = np.clip(mean + rng.normal(scale=0.1, size=mean.shape), 0.0, 1.0)
        latent = diffusion.ddim_invert(x0, prov, sched)
        rec = diffusion.ddim_sample(prov, sched, latent)
        assert imgcore.psnr(x0, rec) > 40.0

    def test_zero_step_inversion_returns_input(self):
        sched = diffusion.VpSchedule(steps=0)
        prov = diffusion.GaussianScore(np.full((2, 2, 3), 0.5), 0.04, sched)
        x0 = np.random.default_rng(13).uniform(size=(2, 2, 3))
        assert np.array_equal(diffusion.ddim_invert(x0, prov, sched), x0)

    def test_sde_sampler_rejects_zero_steps(self):
        sched = diffusion.VpSchedule(steps=0)
        prov = diffusion.GaussianScore(np.full((2, 2, 3), 0.5), 0.04, sched)
        with pytest.raises(ParameterError):
            diffusion.reverse_sample_guided(prov, sched, (2, 2, 3), 0, None)


class TestRelight:
    def test_fixed_point_when_targets_match_input(self, grid_dataset):
        # guidance whose targets are the input's own features leaves the
        # inversion round trip essentially untouched
        _, _, images = grid_dataset
        sched = diffusion.VpSchedule(steps=100)
        prov = diffusion.EmpiricalScore(images, sched)
        x0 = images[5]
        cfg = energy.GuidanceConfig(
            lambda_i=300.0,
            lambda_r=50.0,
            target_illum=illum.extract_illumination(x0),
            target_ccr=ccr.extract_ccr(x0),
        )
        latent = diffusion.ddim_invert(x0, prov, sched)
        rec = diffusion.ddim_sample(prov, sched, latent, cfg)
        assert imgcore.psnr(x0, rec) > 35.0

    def test_geometry_guidance_reduces_ccr_drift(self, grid_dataset):
        scenes, lights, images = grid_dataset
        sched = diffusion.VpSchedule(steps=100)
        prov = diffusion.EmpiricalScore(images, sched)
        prompt = left_prompt()
        cfg_free = energy.GuidanceConfig(lambda_i=100.0, lambda_r=0.0)
        cfg_geo = energy.GuidanceConfig(lambda_i=100.0, lambda_r=50.0)
        ccfg = ccr.CcrConfig()
        drift_free, drift_geo = [], []
        for i in (1, 3, 6):
            src = scenegen.render(scenes[i], lights[0]).image
            src_ccr = ccr.extract_ccr(src, ccfg)
            out_free = np.clip(diffusion.relight(src, prompt, prov, sched, cfg_free).final, 0, 1)
            out_geo = np.clip(diffusion.relight(src, prompt, prov, sched, cfg_geo).final, 0, 1)
            drift_free.append(float(np.mean((ccr.extract_ccr(out_free, ccfg) - src_ccr) ** 2)))
            drift_geo.append(float(np.mean((ccr.extract_ccr(out_geo, ccfg) - src_ccr) ** 2)))
        assert np.mean(drift_geo) < np.mean(drift_free)

    def test_relight_improves_prompt_match_over_input(self, grid_dataset):
        scenes, lights, images = grid_dataset
        sched = diffusion.VpSchedule(steps=100)
        prov = diffusion.EmpiricalScore(images, sched)
        prompt = left_prompt()
        y_s = illum.compose_prompt(prompt, (32, 32))
        meas = energy.GuidanceConfig(lambda_i=1.0, lambda_r=0.0, target_illum=y_s)
        cfg = energy.GuidanceConfig(lambda_i=100.0, lambda_r=50.0)
        vals_in, vals_out = [], []
        for i in (0, 4):
            src = scenegen.render(scenes[i], lights[0]).image
            run = diffusion.relight(src, prompt, prov, sched, cfg)
            vals_in.append(energy.eval_energy(src, meas).illum_term)
            vals_out.append(energy.eval_energy(np.clip(run.final, 0, 1), meas).illum_term)
        assert np.mean(vals_out) < np.mean(vals_in)

    def test_trace_is_returned(self, grid_dataset):
        _, _, images = grid_dataset
        sched = diffusion.VpSchedule(steps=20)
        prov = diffusion.EmpiricalScore(images, sched)
        run = diffusion.relight(
            images[0],
            left_prompt(),
            prov,
            sched,
            energy.GuidanceConfig(lambda_i=100.0, lambda_r=50.0),
        )
        assert len(run.energy_trace) == 20
