import json

import numpy as np
import pytest

from photoshadow.formats import (DataFormatError, matrix_from_json, matrix_to_json, mesh_from_json,
                                 mesh_to_json, noise_from_json, noise_to_json, read_voltage_csv,
                                 series_from_csv, series_to_csv, sig9)
from photoshadow.haar import RngSeed, sample_haar
from photoshadow.matcore import frobenius_distance
from photoshadow.mesh import compose_mesh, decompose_unitary
from photoshadow.noise import sample_coherent_distortion
from photoshadow.shadow import ScalingSeries


def _through_text(obj):
    return json.loads(json.dumps(obj))


def test_matrix_round_trip():
    u = sample_haar(8, 1)
    np.testing.assert_array_equal(matrix_from_json(_through_text(matrix_to_json(u))), u)


def test_matrix_bad_input():
    with pytest.raises(DataFormatError, match="re"):
        matrix_from_json({"d": 2, "re": [[1, 0]], "im": [[0, 0], [0, 0]]})
    with pytest.raises(DataFormatError):
        matrix_from_json({"d": 2, "re": [[1, 0], [0, 1]]})


def test_mesh_and_noise_round_trip():
    u = sample_haar(6, 2)
    cfg = mesh_from_json(_through_text(mesh_to_json(decompose_unitary(u))))
    assert frobenius_distance(compose_mesh(cfg), u) <= 1e-10
    nm = sample_coherent_distortion(4, 0.0127, RngSeed(1)).with_p(0.0255)
    back = noise_from_json(_through_text(noise_to_json(nm)))
    assert back.p == nm.p and back.epsilon == pytest.approx(nm.epsilon, abs=1e-15)


def test_series_round_trip(tmp_path):
    s = ScalingSeries(4, [10, 100], [0.3, 0.03], [0.01, 0.001], [20, 20])
    path = tmp_path / "s.csv"
    path.write_text(series_to_csv(s))
    back = series_from_csv(path, 4)
    np.testing.assert_allclose(back.mse_mean, s.mse_mean)


def test_series_errors_name_row(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("M,mse_mean,mse_stderr,replications\n10,0.3,0.01,20\n100,abc,0.001,20\n")
    with pytest.raises(DataFormatError, match="row 3, field mse_mean"):
        series_from_csv(path, 4)


def test_voltage_csv(tmp_path):
    path = tmp_path / "v.csv"
    path.write_text("run_id,unitary_id," + ",".join(f"v{i}" for i in range(8)) + "\n")
    with pytest.raises(DataFormatError, match="no voltage rows"):
        read_voltage_csv(path)
    path.write_text(path.read_text() + "0,0,1,1,1,1,1,1,1,x\n")
    with pytest.raises(DataFormatError, match="row 2"):
        read_voltage_csv(path)


def test_sig9():
    assert sig9(0.1234567891234) == 0.123456789
    assert sig9(float("nan")) is None
