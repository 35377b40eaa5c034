"""Tests for domains, meshes and the thin-domain quadrature.

Properties checked:

1. Plate meshes need even counts so that O is a node
2. Rod meshes partition [0, L] uniformly
3. The rescaled quadrature integrates the measure of the plate and rod
4. Thickness moments are exact
5. Invalid domains and thicknesses are rejected
"""

import numpy as np
import pytest

from mechanics.errors import DomainError, GeometryError
from mechanics.geometry import (
    Edge,
    PlateDomain,
    RodDomain,
    build_plate_mesh,
    build_rod_mesh,
    disc_rule,
    gauss_legendre,
    thin_quadrature,
)


# =============================================================================
# Domains
# =============================================================================

class TestDomains:

    def test_unit_disc_must_fit_inside_plate(self):
        with pytest.raises(GeometryError):
            PlateDomain(1.0, 2.0)

    def test_clamped_edges_required_and_known(self):
        with pytest.raises(GeometryError):
            PlateDomain(2.0, 2.0, ())
        with pytest.raises(GeometryError):
            PlateDomain(2.0, 2.0, ("north",))

    def test_clamped_edges_normalized_to_canonical_order(self):
        domain = PlateDomain(2.0, 2.0, ("top", "left"))
        assert domain.clamped == (Edge.LEFT, Edge.TOP)

    def test_rod_length_positive(self):
        with pytest.raises(GeometryError):
            RodDomain(0.0)


# =============================================================================
# Plate Mesh
# =============================================================================

class TestPlateMesh:

    def test_four_by_four_mesh(self):
        mesh = build_plate_mesh(PlateDomain(2.0, 2.0), 4)
        assert mesh.n_nodes == 25
        assert mesh.n_elements == 16
        np.testing.assert_array_equal(mesh.nodes[mesh.origin_node], [0.0, 0.0])

    def test_two_by_two_mesh_has_center_node(self):
        mesh = build_plate_mesh(PlateDomain(1.5, 1.5), 2)
        assert mesh.n_nodes == 9
        np.testing.assert_array_equal(mesh.nodes[mesh.origin_node], [0.0, 0.0])

    def test_odd_resolution_rejected(self):
        with pytest.raises(GeometryError):
            build_plate_mesh(PlateDomain(2.0, 2.0), 3)

    def test_rectangular_resolution(self):
        mesh = build_plate_mesh(PlateDomain(2.0, 3.0), (4, 6))
        assert (mesh.nx, mesh.ny) == (4, 6)
        assert mesh.hx == pytest.approx(1.0)
        assert mesh.hy == pytest.approx(1.0)

    def test_clamped_nodes_are_boundary_nodes(self):
        mesh = build_plate_mesh(PlateDomain(2.0, 2.0), 4)
        boundary = mesh.nodes[mesh.clamped_nodes]
        on_edge = np.isclose(np.abs(boundary[:, 0]), 2.0) | np.isclose(np.abs(boundary[:, 1]), 2.0)
        assert on_edge.all()
        assert len(mesh.clamped_nodes) == 16

    def test_gauss_points_integrate_area(self):
        mesh = build_plate_mesh(PlateDomain(2.0, 1.5), 4)
        _, w = mesh.gauss_points()
        assert np.sum(w) == pytest.approx(12.0, abs=1e-12)

    def test_locate_outside_raises(self):
        mesh = build_plate_mesh(PlateDomain(2.0, 2.0), 4)
        with pytest.raises(DomainError):
            mesh.locate(np.array([[2.5, 0.0]]))


# =============================================================================
# Rod Mesh
# =============================================================================

class TestRodMesh:

    def test_four_elements_on_unit_rod(self):
        mesh = build_rod_mesh(RodDomain(1.0), 4)
        np.testing.assert_allclose(mesh.nodes, [0.0, 0.25, 0.5, 0.75, 1.0], atol=1e-15)

    def test_single_element(self):
        mesh = build_rod_mesh(RodDomain(2.0), 1)
        np.testing.assert_array_equal(mesh.nodes, [0.0, 2.0])

    def test_zero_elements_rejected(self):
        with pytest.raises(GeometryError):
            build_rod_mesh(RodDomain(1.0), 0)


# =============================================================================
# Quadrature
# =============================================================================

class TestQuadrature:

    def test_gauss_legendre_exact_for_polynomials(self):
        x, w = gauss_legendre(3, 0.0, 2.0)
        assert np.sum(w * x ** 5) == pytest.approx(2.0 ** 6 / 6.0, rel=1e-13)

    def test_disc_rule_measure_and_second_moment(self):
        X, w = disc_rule(4)
        assert np.sum(w) == pytest.approx(np.pi, rel=1e-13)
        assert np.sum(w * X[:, 0] ** 2) == pytest.approx(np.pi / 4.0, rel=1e-12)

    def test_plate_measure(self, plate_mesh, rod_mesh):
        quad = thin_quadrature(plate_mesh, rod_mesh, 0.1, 4)
        assert quad.integrate_plate(np.ones(len(quad.plate_points))) == pytest.approx(32.0, abs=1e-12)

    def test_rod_measure_excludes_junction(self, plate_mesh, rod_mesh):
        delta = 0.1
        quad = thin_quadrature(plate_mesh, rod_mesh, delta, 4)
        measure = quad.integrate_rod(np.ones(len(quad.rod_points)))
        disc_measure = np.sum(quad.disc_weights)
        assert measure == pytest.approx(disc_measure * (1.0 - delta), rel=1e-12)
        assert measure == pytest.approx(np.pi * (1.0 - delta), rel=1e-12)

    def test_thickness_second_moment(self, plate_mesh, rod_mesh):
        quad = thin_quadrature(plate_mesh, rod_mesh, 0.1, 4)
        assert np.sum(quad.thickness_weights * quad.thickness ** 2) == pytest.approx(2.0 / 3.0, abs=1e-12)

    def test_rod_points_inside_junction_carry_no_weight(self, plate_mesh, rod_mesh):
        quad = thin_quadrature(plate_mesh, rod_mesh, 0.1, 4)
        assert np.all(quad.axial_weights[quad.axial < 0.1] == 0.0)
        assert np.all(quad.rod_active == (quad.axial > 0.1))

    def test_delta_at_least_rod_length_rejected(self, plate_mesh, rod_mesh):
        with pytest.raises(GeometryError):
            thin_quadrature(plate_mesh, rod_mesh, 1.0, 4)
