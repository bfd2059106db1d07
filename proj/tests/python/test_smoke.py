"""Smoke tests for the pmrilab extension module."""

import numpy as np
import pytest

import pmrilab


def test_fft_parseval_and_inverse():
    rng = np.random.default_rng(0)
    x = (rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8)))
    y = pmrilab.fft2c(x)
    assert np.linalg.norm(y) == pytest.approx(np.linalg.norm(x), rel=1e-12)
    back = pmrilab.ifft2c(y)
    assert np.allclose(back, x, atol=1e-12)


def test_phantom_determinism_and_classes():
    img1, lab1 = pmrilab.make_phantom(64, 64, seed=3)
    img2, lab2 = pmrilab.make_phantom(64, 64, seed=3)
    assert np.array_equal(img1, img2)
    assert np.array_equal(lab1, lab2)
    assert set(np.unique(lab1)) == {0, 1, 2, 3}


def test_coil_maps_are_normalized():
    sens = pmrilab.make_coil_sensitivities(32, 32, 4, seed=1)
    sos2 = np.sum(np.abs(sens) ** 2, axis=0)
    assert np.allclose(sos2, 1.0, atol=1e-6)


def test_mask_fraction():
    mask = pmrilab.make_vd_mask(64, 64, accel=6.0, seed=5)
    frac = mask.mean()
    assert 0.157 <= frac <= 0.177


def test_acquisition_and_dc_solve():
    img, _ = pmrilab.make_phantom(32, 32, seed=7)
    sens = pmrilab.make_coil_sensitivities(32, 32, 4, seed=8)
    mask = pmrilab.make_vd_mask(32, 32, accel=4.0, center_fraction=0.05,
                                seed=9)
    ds = pmrilab.simulate_acquisition(img, sens, mask, accel=4.0, sigma=0.0,
                                      seed=10)
    assert ds["kspace"].shape == (4, 32, 32)
    # Unsampled entries are exactly zero.
    assert np.all(ds["kspace"][:, mask == 0] == 0)

    z = pmrilab.apply_adjoint(ds["kspace"], mask)
    out = pmrilab.dc_solve(z, ds["kspace"], mask, 2.0)
    assert out.shape == z.shape
    assert np.all(np.isfinite(out))


def test_sos_and_metrics():
    img, lab = pmrilab.make_phantom(32, 32, seed=11)
    sens = pmrilab.make_coil_sensitivities(32, 32, 2, seed=12)
    coils = sens * img[None, :, :]
    s = pmrilab.sos(coils)
    assert np.allclose(s.real, np.abs(img), atol=1e-6)

    assert pmrilab.snr_db(s, s) == np.inf
    assert pmrilab.ssim(s, s) == 1.0
    assert pmrilab.dice(lab, lab, 2) == 1.0


def test_nuclear_norm_rank1():
    rng = np.random.default_rng(13)
    u = rng.standard_normal((9, 1)) + 1j * rng.standard_normal((9, 1))
    v = rng.standard_normal((1, 4)) + 1j * rng.standard_normal((1, 4))
    a = u @ v
    want = np.linalg.norm(u) * np.linalg.norm(v)
    assert pmrilab.nuclear_norm(a) == pytest.approx(want, rel=1e-10)


def test_tensor_file_roundtrip(tmp_path):
    rng = np.random.default_rng(14)
    x = (rng.standard_normal((3, 8, 8)) +
         1j * rng.standard_normal((3, 8, 8))).astype(np.complex64)
    path = str(tmp_path / "t.pmri")
    pmrilab.write_tensor(path, x)
    back = pmrilab.read_tensor(path)
    assert np.array_equal(back.astype(np.complex64), x)


def test_clear_reconstruct_improves_fully_sampled():
    img, _ = pmrilab.make_phantom(32, 32, seed=15)
    sens = pmrilab.make_coil_sensitivities(32, 32, 2, seed=16)
    coils = sens * img[None, :, :]
    mask = np.ones((32, 32), dtype=np.uint8)
    kspace = pmrilab.apply_forward(coils, mask)
    rec, info = pmrilab.clear_reconstruct(kspace, mask, 0.001, iters=2)
    ref = pmrilab.sos(coils)
    got = pmrilab.sos(rec)
    assert pmrilab.snr_db(got, ref) > 60.0
    assert len(info["objective_after"]) == 2
