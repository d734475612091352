import numpy as np

from oracles import jacobi_eigenvalues, random_symmetric


def test_jacobi_diagonal():
    np.testing.assert_allclose(jacobi_eigenvalues(np.diag([3.0, 1.0, 2.0])), [1, 2, 3])


def test_jacobi_known_2x2():
    # [[2,1],[1,2]] has eigenvalues 1 and 3
    np.testing.assert_allclose(jacobi_eigenvalues([[2.0, 1.0], [1.0, 2.0]]), [1, 3], atol=1e-14)


def test_jacobi_preserves_trace_and_frobenius():
    a = random_symmetric(9, np.random.default_rng(0))
    vals = jacobi_eigenvalues(a)
    assert abs(vals.sum() - np.trace(a)) < 1e-12
    assert abs(np.sum(vals**2) - np.sum(a**2)) < 1e-11
