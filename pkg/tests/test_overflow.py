import pytest

from intdfa.overflow import audit, bp_bound_bits, dfa_bound_bits, format_csv, format_table


def test_bp_bound():
    assert bp_bound_bits(8, 8, 4) == 40
    assert bp_bound_bits(8, 8, 0) == 8
    assert bp_bound_bits(6, 10, 3) == 36


def test_dfa_bound():
    assert dfa_bound_bits(8, 8) == 16
    assert dfa_bound_bits(1, 1) == 2
    assert dfa_bound_bits(8, 4) == 12


def test_bound_validation():
    with pytest.raises(ValueError):
        bp_bound_bits(0, 8, 1)
    with pytest.raises(ValueError):
        bp_bound_bits(8, 8, -1)
    with pytest.raises(ValueError):
        dfa_bound_bits(8, 0)


def test_five_hidden_layers_32_bits():
    report = audit(5, 8, 8, 8, 32)
    assert report.bp_flagged == [1, 2]
    assert report.dfa_flagged == []
    bounds = {lb.hidden_layer: lb.bp_bound_bits for lb in report.layers}
    assert bounds == {1: 48, 2: 40, 3: 32, 4: 24, 5: 16}
    assert not report.layers[2].bp_overflows
    assert all(lb.dfa_bound_bits == 16 for lb in report.layers)


def test_single_hidden_layer():
    report = audit(1, 8, 8, 8, 32)
    assert report.bp_flagged == [] and report.layers[0].bp_bound_bits == 16


@pytest.mark.parametrize("depth", range(1, 7))
def test_wide_accumulator_never_flags(depth):
    report = audit(depth, 8, 8, 8, 64)
    assert report.bp_flagged == [] and report.dfa_flagged == []


def test_flags_monotone_in_depth():
    # hidden layer j of a depth-H net is H - j + 1 hops away; compare by hop count
    for h in range(1, 10):
        shallow = {lb.hops_from_output for lb in audit(h, 8, 8, 8, 32).layers if lb.bp_overflows}
        deep = {lb.hops_from_output for lb in audit(h + 1, 8, 8, 8, 32).layers if lb.bp_overflows}
        assert shallow <= deep
        assert len(audit(h, 8, 8, 8, 32).bp_flagged) <= len(audit(h + 1, 8, 8, 8, 32).bp_flagged)


def test_dfa_flags_when_accumulator_tiny():
    assert audit(3, 8, 8, 8, 15).dfa_flagged == [1, 2, 3]


def test_validation():
    with pytest.raises(ValueError, match="accumulator"):
        audit(5, 8, 8, 8, 0)
    with pytest.raises(ValueError):
        audit(0, 8, 8, 8, 32)


def test_wide_layer_warning():
    assert audit(2, 8, 8, 8, 32, widths=[784, 100]).warnings == []
    report = audit(2, 8, 8, 8, 32, widths=[784, 70000])
    assert len(report.warnings) == 1 and "70000" in report.warnings[0]


def test_formatting():
    report = audit(5, 8, 8, 8, 32)
    table = format_table(report)
    assert "log2(fan-in)" in table
    assert len(table.splitlines()) == 2 + 5 + 1
    csv = format_csv(report).splitlines()
    assert csv[0] == "hidden_layer,hops,bp_bits,dfa_bits,bp_overflow,dfa_overflow"
    assert csv[1] == "1,5,48,16,yes,no"
    assert csv[3] == "3,3,32,16,no,no"
