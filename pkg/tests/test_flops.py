"""Closed-form op counts versus the instrumented interpreter."""

import json

import pytest

from grkat.flops import (OpCount, audit, audit_json, count_horner_ops,
                         count_polynomial_ops, grkan_layer_flops,
                         grkan_layer_params, grkan_layer_params_table,
                         kan_edge_flops, kan_layer_flops, mlp_layer_flops,
                         mlp_layer_params, rational_flops_horner,
                         rational_flops_plain)


class TestReferenceNumbers:
    def test_plain_rational_5_4(self):
        oc = rational_flops_plain(5, 4)
        assert (oc.mults, oc.adds, oc.abs_ops, oc.divs) == (34, 10, 1, 1)
        assert oc.total() == 46

    def test_horner_rational_5_4(self):
        oc = rational_flops_horner(5, 4)
        assert (oc.mults, oc.adds, oc.abs_ops, oc.divs) == (9, 10, 1, 1)
        assert oc.total() == 21

    def test_bspline_edge_3_3(self):
        assert kan_edge_flops(3, 3) == 204

    def test_negative_degree_rejected(self):
        with pytest.raises(ValueError):
            rational_flops_plain(-1, 4)
        with pytest.raises(ValueError):
            rational_flops_horner(5, -1)


class TestInterpreterAgreement:
    def test_horner_counts_match_formula_over_degree_grid(self):
        for m in range(9):
            for n in range(9):
                assert count_horner_ops(m, n) == rational_flops_horner(m, n), \
                    f"mismatch at m={m}, n={n}"

    def test_polynomial_counts(self):
        for deg in range(8):
            oc = count_polynomial_ops(deg)
            assert oc == OpCount(mults=deg, adds=deg)


class TestLayerAccounting:
    def test_mlp(self):
        assert mlp_layer_flops(512, 512, 0) == 2 * 512 * 512
        assert mlp_layer_params(512, 512) == 512 * 512 + 512

    def test_kan_uses_edge_bracket(self):
        assert kan_layer_flops(512, 512, 3, 3, 0) == 512 * 512 * 204

    def test_grkan(self):
        # (2m + 2n + 3) per input channel plus the dense map
        assert grkan_layer_flops(512, 512, 5, 4) == 21 * 512 + 2 * 512 * 512

    def test_grkan_params_layouts(self):
        shared = grkan_layer_params(512, 512, 5, 4, 8)
        assert shared == 512 * 512 + 512 + 6 * 8 + 4
        table = grkan_layer_params_table(512, 512, 5, 4, 8)
        assert table == 512 * 512 + 512 + 5 + 4 * 8

    def test_audit_reports_both_conventions(self):
        report = audit("grkan", 512, 512)
        assert report["params"] == grkan_layer_params(512, 512, 5, 4, 8)
        assert report["breakdown"]["params_table_convention"] == \
            grkan_layer_params_table(512, 512, 5, 4, 8)
        assert report["per_scalar"]["rational_plain"]["mults"] == 34
        assert report["per_scalar"]["rational_horner"]["mults"] == 9
        assert report["per_scalar"]["bspline_edge"] == 204

    def test_audit_json_round_trips(self):
        doc = json.loads(audit_json("mlp", 64, 64, nonlinear_flops=8))
        assert doc["flops"] == 8 * 64 + 2 * 64 * 64

    def test_unknown_variant(self):
        with pytest.raises(ValueError):
            audit("conv", 64, 64)
