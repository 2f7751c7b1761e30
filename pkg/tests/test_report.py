"""
Tests for report module
"""

import json

import numpy as np
import pytest

from report import Curve, Report, Status, Verdict, write_csv, write_report


@pytest.fixture
def report():
    r = Report('apply', {'grid_points': 64}, seed=7)
    r.results['errors'] = {'identity': np.float64(1e-15), 'phase': 1 + 2j, 'samples': np.arange(3)}
    r.add(Verdict.at_most('identity_multiplication', 1e-15, 1e-10, 'bilinear-operator'))
    return r


class TestVerdict:

    def test_at_most(self):
        assert Verdict.at_most('x', 0.5, 1.0).status == Status.PASS
        assert Verdict.at_most('x', 1.5, 1.0).status == Status.FAIL
        assert Verdict.at_most('x', float('nan'), 1.0).status == Status.INDETERMINATE

    def test_close_to(self):
        assert Verdict.close_to('s', 3, 3, 0).status == Status.PASS
        assert Verdict.close_to('s', 4, 3, 0.5).status == Status.FAIL
        assert Verdict.close_to('s', None, 3, 0.5).status == Status.INDETERMINATE

    def test_flag(self):
        assert Verdict.flag('f', np.bool_(True)).status == Status.PASS
        assert Verdict.flag('f', True, expected=False).status == Status.FAIL
        assert Verdict.flag('f', None).status == Status.INDETERMINATE

    def test_to_dict(self):
        payload = Verdict.flag('f', True, module='bounds-suite', note='n').to_dict()
        assert payload == {'name': 'f', 'status': 'pass', 'measured': True, 'expected': True,
                           'tolerance': None, 'module': 'bounds-suite', 'note': 'n'}


class TestReport:
    """Status aggregation and JSON emission"""

    def test_status_precedence(self, report):
        assert report.status == Status.PASS
        report.add(Verdict.indeterminate('remainder', 'too few shells'))
        assert report.status == Status.INDETERMINATE
        report.add(Verdict.at_most('duality', 1.0, 1e-10))
        assert report.status == Status.FAIL
        assert report.summary() == {'pass': 1, 'fail': 1, 'indeterminate': 1}

    def test_error_fails_report(self, report):
        report.error = {'error_code': 'GRID_MISMATCH', 'message': 'x'}
        assert report.status == Status.FAIL

    def test_json_is_plain_and_sorted(self, report):
        text = report.to_json()
        payload = json.loads(text)
        assert payload['results']['errors']['phase'] == [1.0, 2.0]
        assert payload['results']['errors']['samples'] == [0, 1, 2]
        assert list(payload) == sorted(payload)
        assert text.endswith("}\n")

    def test_extend(self, report):
        full = Report('full-suite', {}, seed=7)
        full.extend(report)
        assert 'apply' in full.results
        assert len(full.verdicts) == 1


class TestFiles:

    def test_csv_quoting_and_line_ends(self, tmp_path):
        path = write_csv(tmp_path / 'curve.csv', ['name', 'value', 'missing'],
                         [{'name': 'a,b', 'value': 0.1}, {'name': 'plain', 'value': np.float64(2.0)}])
        data = path.read_bytes()
        assert data.split(b'\r\n')[:3] == [b'name,value,missing', b'"a,b",0.1,', b'plain,2.0,']

    def test_write_report(self, report, output_dir):
        report.curves.append(Curve('kernel_decay_riesz_M0', ['S_shell_center', 'sup_abs_kernel'],
                                   [{'S_shell_center': 0.5, 'sup_abs_kernel': 3.0}]))
        paths = write_report(report, output_dir)
        assert [p.name for p in paths] == ['report.json', 'kernel_decay_riesz_M0.csv']
        payload = json.loads((output_dir / 'report.json').read_text())
        assert payload['curves'] == ['kernel_decay_riesz_M0.csv']
        assert payload['status'] == 'pass'

    def test_write_is_byte_stable(self, report, tmp_path):
        first = write_report(report, tmp_path / 'a')[0].read_bytes()
        second = write_report(report, tmp_path / 'b')[0].read_bytes()
        assert first == second


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
