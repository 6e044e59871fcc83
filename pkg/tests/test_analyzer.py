"""Per-layer operation counting against the hand-enumerated table."""

import csv
import io

from znq import analyzer, ir, presets, prototxt

import topology_table as T


def _zynqnet_report():
    g = prototxt.parse(presets.load_preset("zynqnet"))
    return analyzer.analyze(g)


def test_macc_per_conv_layer_matches_enumeration():
    rep = _zynqnet_report()
    by_name = {r.name: r for r in rep.per_layer}
    for row in T.CONV_ROWS:
        assert by_name[row[0]].macc == T.conv_macc(row), row[0]


def test_conv1_macc_value():
    rep = _zynqnet_report()
    by_name = {r.name: r for r in rep.per_layer}
    assert by_name["conv1"].macc == 28_311_552  # 128*128*3*64*9


def test_params_per_conv_layer_matches_enumeration():
    rep = _zynqnet_report()
    by_name = {r.name: r for r in rep.per_layer}
    for row in T.CONV_ROWS:
        assert by_name[row[0]].params == T.conv_params(row), row[0]


def test_totals_frozen():
    rep = _zynqnet_report()
    assert rep.totals.macc == T.TOTAL_MACC
    assert rep.totals.params == T.TOTAL_PARAMS
    assert rep.totals.activations == T.TOTAL_ACTIVATIONS


def test_bias_adds_counted_separately_from_macc():
    rep = _zynqnet_report()
    by_name = {r.name: r for r in rep.per_layer}
    for row in T.CONV_ROWS:
        name, _, ch, h, w, _ = row
        assert by_name[name].add == ch * h * w, name


def test_relu_comparisons():
    rep = _zynqnet_report()
    relu_comp = sum(r.comp for r in rep.per_layer if r.kind == "ReLU")
    assert relu_comp == T.TOTAL_RELU_COMP


def test_global_pool_and_softmax_counts():
    rep = _zynqnet_report()
    by_name = {r.name: r for r in rep.per_layer}
    assert by_name["pool10"].add == T.GLOBAL_POOL_ADDS
    assert by_name["pool10"].div == T.GLOBAL_POOL_DIVS
    assert by_name["loss"].exp == T.SOFTMAX_EXPS
    assert by_name["loss"].add == T.SOFTMAX_EXPS - 1
    assert by_name["loss"].div == T.SOFTMAX_EXPS


def test_zero_op_layers():
    rep = _zynqnet_report()
    by_name = {r.name: r for r in rep.per_layer}
    for name in ("data", "drop9", "conv10", "fire2/concat"):
        r = by_name[name]
        assert (r.macc, r.comp, r.add, r.div, r.exp) == (0, 0, 0, 0, 0)
        assert r.activations > 0


def test_max_pool_comparisons():
    g = prototxt.parse("""
    layer { name: "d" type: "Data" top: "d"
      input_param { shape { dim: 1 dim: 2 dim: 8 dim: 8 } } }
    layer { name: "p" type: "Pooling" bottom: "d" top: "p"
      pooling_param { pool: MAX kernel_size: 3 stride: 2 } }
    """)
    rep = analyzer.analyze(g)
    by_name = {r.name: r for r in rep.per_layer}
    # out 3x3, per output k*k-1 comparisons
    assert by_name["p"].comp == 3 * 3 * 2 * (9 - 1)


def test_windowed_avg_pool_adds_and_divs():
    g = prototxt.parse("""
    layer { name: "d" type: "Data" top: "d"
      input_param { shape { dim: 1 dim: 2 dim: 8 dim: 8 } } }
    layer { name: "p" type: "Pooling" bottom: "d" top: "p"
      pooling_param { pool: AVE kernel_size: 2 stride: 2 } }
    """)
    rep = analyzer.analyze(g)
    by_name = {r.name: r for r in rep.per_layer}
    assert by_name["p"].add == 4 * 4 * 2 * 4
    assert by_name["p"].div == 4 * 4 * 2


def test_inner_product_counts():
    g = prototxt.parse("""
    layer { name: "d" type: "Data" top: "d"
      input_param { shape { dim: 1 dim: 4 dim: 3 dim: 3 } } }
    layer { name: "fc" type: "InnerProduct" bottom: "d" top: "fc"
      inner_product_param { num_output: 10 } }
    """)
    rep = analyzer.analyze(g)
    by_name = {r.name: r for r in rep.per_layer}
    assert by_name["fc"].macc == 4 * 3 * 3 * 10
    assert by_name["fc"].add == 10
    assert by_name["fc"].params == 4 * 3 * 3 * 10 + 10


def test_module_grouping_by_prefix():
    rep = _zynqnet_report()
    mods = {m.name: m for m in rep.per_module}
    assert "fire2" in mods and "conv10" in mods
    fire2_rows = [r for r in rep.per_layer if r.name.startswith("fire2/")]
    assert mods["fire2"].macc == sum(r.macc for r in fire2_rows)
    assert mods["fire2"].activations == sum(r.activations for r in fire2_rows)
    # conv10 groups the two splits plus the concat row named exactly conv10
    assert mods["conv10"].params == 2 * 377_344


def test_csv_shape_and_totals_row():
    rep = _zynqnet_report()
    text = analyzer.to_csv(rep)
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["name", "kind", "ch_out", "h_out", "w_out",
                       "macc", "comp", "add", "div", "exp",
                       "params", "activations"]
    assert len(rows) == 1 + 65 + 1
    assert rows[1][0] == "data"
    total = rows[-1]
    assert total[0] == "TOTAL"
    assert int(total[5]) == T.TOTAL_MACC
    assert int(total[10]) == T.TOTAL_PARAMS
    assert int(total[11]) == T.TOTAL_ACTIVATIONS


def test_csv_quotes_awkward_names():
    g = ir.NetworkGraph("t", [
        ir.LayerSpec(name='we,ird"name', kind=ir.KIND_DATA,
                     input_shape=ir.TensorShape(1, 2, 2)),
    ])
    text = analyzer.to_csv(analyzer.analyze(g))
    assert '"we,ird""name"' in text


def test_report_json_is_ordered_and_complete():
    rep = _zynqnet_report()
    data = rep.to_json()
    assert [r["name"] for r in data["layers"]][:2] == ["data", "conv1"]
    assert data["totals"]["macc"] == T.TOTAL_MACC
    assert data["layers"][1]["bottoms"] == ["data"]
    assert len(data["layers"]) == 65
