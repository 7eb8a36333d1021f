import numpy as np
import pytest

from mmsde import (
    NonConvergenceError,
    Projection,
    indicator_box,
    indicator_halfspace,
    indicator_polyhedron,
    project_classical,
    project_elastic,
    project_elastic_iterated,
)


def wedge_op():
    # D = {x : x2 >= |x1|}
    return indicator_polyhedron([([1.0, -1.0], 0.0), ([-1.0, -1.0], 0.0)])


class TestClassical:
    def test_halfline(self):
        op = indicator_halfspace([-1.0], 0.0)
        assert project_classical(op, [-2.0]) == pytest.approx([0.0])

    def test_identity_on_domain(self):
        op = indicator_box([0.0, 0.0], [1.0, 1.0])
        z = np.array([0.3, 0.7])
        np.testing.assert_array_equal(project_classical(op, z), z)

    def test_ball_radial(self, zoo):
        assert project_classical(zoo["ball2"], [0.0, 3.0]) == pytest.approx([0.0, 1.0])

    def test_variational_inequality(self, zoo, rng):
        # <z - x, x' - x> <= 0 for sampled domain points x'
        for name in ("halfline", "box2", "ball2"):
            op = zoo[name]
            for _ in range(50):
                z = rng.normal(0.0, 3.0, size=op.dimension)
                x = project_classical(op, z)
                probe = project_classical(op, rng.normal(0.0, 3.0, size=op.dimension))
                assert float((z - x) @ (probe - x)) <= 1e-10


class TestElastic:
    def test_halfline_rebound(self):
        op = indicator_halfspace([-1.0], 0.0)
        assert project_elastic(op, 0.5, [-2.0]) == pytest.approx([1.0])

    def test_identity_on_domain(self, zoo, rng):
        for op in (zoo["halfline"], zoo["box2"], zoo["ball2"]):
            z = project_classical(op, rng.normal(0.0, 2.0, size=op.dimension))
            for c in (0.0, 0.3, 1.0):
                np.testing.assert_array_equal(project_elastic(op, c, z), z)

    def test_box_mirror(self):
        op = indicator_box([0.0, 0.0], [1.0, 1.0])
        assert project_elastic(op, 1.0, [1.5, 0.5]) == pytest.approx([0.5, 0.5])

    def test_c_zero_collapses_bitwise(self, zoo, rng):
        for op in zoo.values():
            for _ in range(25):
                z = rng.normal(0.0, 3.0, size=op.dimension)
                np.testing.assert_array_equal(
                    project_elastic(op, 0.0, z), project_classical(op, z))

    def test_rejects_bad_elasticity(self, zoo):
        with pytest.raises(ValueError):
            project_elastic(zoo["halfline"], 1.5, [1.0])
        with pytest.raises(ValueError):
            project_elastic(zoo["halfline"], -0.1, [1.0])


class TestElasticIterated:
    def test_one_step_cases(self, zoo):
        # half-line: a single elastic step lands inside
        op = zoo["halfline"]
        for c in (0.2, 0.5, 1.0):
            np.testing.assert_array_equal(
                project_elastic_iterated(op, c, [-2.0]),
                project_elastic(op, c, [-2.0]))
        # box corner mirror lands inside after one step
        box = zoo["box2"]
        assert project_elastic_iterated(box, 1.0, [2.0, 2.0]) == pytest.approx([0.0, 0.0])

    def test_wedge_limit_against_brute_force_oracle(self):
        op = wedge_op()
        z = np.array([3.0, 0.0])
        # oracle: iterate the elastic map to machine stabilization
        w = z.copy()
        for _ in range(10_000):
            nxt = project_elastic(op, 1.0, w)
            if np.linalg.norm(nxt - w) < 1e-14:
                break
            w = nxt
            if op.in_domain(w, 1e-12):
                break
        limit = project_elastic_iterated(op, 1.0, z)
        assert limit == pytest.approx(w, abs=1e-9)
        assert op.in_domain(limit, 1e-8)

    def test_wedge_limit_satisfies_projection_axioms(self, rng):
        op = wedge_op()
        proj = Projection(kind="elastic_iterated", c=1.0)
        pts = rng.normal(0.0, 2.0, size=(1000, 2))
        for i in range(0, 1000, 2):
            a, b = pts[i], pts[i + 1]
            pa, pb = proj(op, a), proj(op, b)
            assert np.linalg.norm(pa - pb) <= np.linalg.norm(a - b) + 1e-10
        inside = np.array([0.0, 2.0])
        assert proj(op, inside) == pytest.approx(inside)

    def test_idempotent_on_output(self, zoo, rng):
        for name in ("halfline", "box2", "ball2"):
            op = zoo[name]
            for _ in range(20):
                z = rng.normal(0.0, 3.0, size=op.dimension)
                w = project_elastic_iterated(op, 0.7, z)
                again = project_elastic_iterated(op, 0.7, w)
                assert again == pytest.approx(w, abs=1e-9)

    def test_exhausting_budget_raises(self):
        # narrow cone x2 >= 3|x1|: the first mirror bounce stays outside
        op = indicator_polyhedron([([3.0, -1.0], 0.0), ([-3.0, -1.0], 0.0)])
        with pytest.raises(NonConvergenceError) as info:
            project_elastic_iterated(op, 1.0, [1.0, 0.0], max_iter=1)
        assert info.value.last is not None
        assert info.value.residual is not None


class TestProjectionDispatch:
    def test_kinds(self, zoo):
        op = zoo["halfline"]
        z = [-2.0]
        assert Projection()(op, z) == pytest.approx([0.0])
        assert Projection(kind="elastic", c=0.5)(op, z) == pytest.approx([1.0])
        assert Projection(kind="elastic_iterated", c=0.5)(op, z) == pytest.approx([1.0])

    def test_rejects_unknown_kind(self):
        with pytest.raises(ValueError):
            Projection(kind="oblique")
        with pytest.raises(ValueError):
            Projection(kind="elastic", c=1.5)


class TestAxioms:
    def test_lipschitz_all_kinds(self, zoo, rng):
        kinds = [Projection(), Projection(kind="elastic", c=0.6),
                 Projection(kind="elastic_iterated", c=0.6)]
        for name in ("halfline", "box2", "ball2"):
            op = zoo[name]
            for proj in kinds:
                worst = -np.inf
                for _ in range(2500):
                    a = rng.normal(0.0, 3.0, size=op.dimension)
                    b = rng.normal(0.0, 3.0, size=op.dimension)
                    pa, pb = proj(op, a), proj(op, b)
                    worst = max(worst, float(np.linalg.norm(pa - pb) - np.linalg.norm(a - b)))
                assert worst <= 1e-10, (name, proj.kind)

    def test_firm_nonexpansiveness(self, zoo, rng):
        for name in ("halfline", "box2", "ball2", "wedge"):
            op = zoo[name]
            for _ in range(500):
                a = rng.normal(0.0, 3.0, size=op.dimension)
                b = rng.normal(0.0, 3.0, size=op.dimension)
                pa, pb = project_classical(op, a), project_classical(op, b)
                lhs = float((pa - pb) @ (pa - pb))
                rhs = float((pa - pb) @ (a - b))
                assert lhs <= rhs + 1e-10

    def test_range_containment(self, zoo, rng):
        for name in ("halfline", "box2", "ball2", "wedge"):
            op = zoo[name]
            for _ in range(100):
                z = rng.normal(0.0, 3.0, size=op.dimension)
                assert op.in_domain(project_classical(op, z), 1e-8)
                assert op.in_domain(project_elastic_iterated(op, 0.8, z), 1e-8)
