import pytest

from empc_dispatch.cases import matrix_cases, parse_case_id, parse_case_spec, star_cases


def test_matrix():
    cases = matrix_cases()
    assert len(cases) == 20 and len(set(cases)) == 20
    assert sum(c.mode == "shrinking" for c in cases) == 10
    labels = {c.label for c in cases}
    assert "trad_NT_shrinking_24" in labels and "proposed_WT_rolling_24_48" in labels


@pytest.mark.parametrize("case", matrix_cases() + star_cases(), ids=lambda c: c.label)
def test_label_round_trip(case):
    assert parse_case_id(case.label) == case


def test_spec():
    assert len(parse_case_spec("matrix,star")) == 22
    assert len(parse_case_spec("shrinking, trad_NT_shrinking_24")) == 10
    assert [c.label for c in parse_case_spec("trad_WT_rolling_48")] == ["trad_WT_rolling_48"]


@pytest.mark.parametrize("bad", ["", "trad_NT_shrinking", "trad_XT_rolling_24",
                                 "proposed_NT_rolling_24", "trad_NT_daily_24",
                                 "trad_NT_rolling_abc", "greedy_NT_rolling_24"])
def test_bad_ids(bad):
    with pytest.raises(ValueError):
        parse_case_spec(bad)
