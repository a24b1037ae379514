import re
import tempfile
from pathlib import Path

import numpy as np
from django.conf import settings
from django.core.exceptions import NON_FIELD_ERRORS, ValidationError
from django.test import SimpleTestCase

from . import exit_codes, units
from .commands import CranCommand, exit_code_epilog
from .report_pdf import ROWS_PER_PAGE, TabularPDF, format_cell
from .runconfig import apply_overrides, load_run_config
from .serialization import check_header, deinterleave, flatten_errors, interleave, parse_json, render_json


class UnitTests(SimpleTestCase):

    def test_parse(self):
        self.assertEqual(units.parse_quantity("20 MHz", units.FREQUENCY), 20e6)
        self.assertEqual(units.parse_quantity("80Mbps", units.RATE), 80e6)
        self.assertEqual(units.parse_quantity("1.5 km", units.LENGTH), 1500.0)
        self.assertEqual(units.parse_quantity("-174 dBm/Hz", units.PSD), -174.0)
        self.assertAlmostEqual(units.parse_quantity("30 dBm", units.POWER), 1.0)
        self.assertEqual(units.parse_quantity("2e-3 W", units.POWER), 2e-3)

    def test_bare_numbers_rejected(self):
        for value in (20, 20.0, "20", True):
            with self.assertRaises(ValidationError):
                units.parse_quantity(value, units.RATE)

    def test_wrong_unit_kind(self):
        with self.assertRaises(ValidationError) as ctx:
            units.parse_quantity("20 MHz", units.RATE)
        self.assertIn("Mbps", str(ctx.exception))

    def test_format(self):
        self.assertEqual(units.format_quantity(20e6, units.RATE), "20 Mbps")
        self.assertEqual(units.format_quantity(500.0, units.RATE), "500 bps")
        self.assertEqual(units.format_quantity(0.0, units.RATE), "0 bps")
        self.assertEqual(units.format_quantity(6.0, units.DECIBEL), "6 dB")

    def test_dbm(self):
        self.assertAlmostEqual(units.watts_to_dbm(1e-3), 0.0)


class RunConfigTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def _write(self, text):
        path = Path(self.tmp.name) / 'run.yaml'
        path.write_text(text, encoding='utf-8')
        return str(path)

    def test_defaults(self):
        config = load_run_config()
        self.assertEqual(config.scenario.num_rrhs, 5)
        self.assertEqual(config.scenario.num_users, 10)
        self.assertEqual(config.scenario.num_subchannels, 64)
        self.assertEqual(config.seed, 0)
        self.assertIsNone(config.sweep)

    def test_file_then_overrides(self):
        path = self._write("seed: 3\nsystem:\n  num_users: 4\n  fronthaul_capacity: 40 Mbps\n")
        config = load_run_config(config_path=path, overrides=['system.num_users=6', 'seed=9'])
        self.assertEqual(config.scenario.num_users, 6)
        self.assertEqual(config.scenario.fronthaul_capacity, 40e6)
        self.assertEqual(config.seed, 9)

    def test_preset_under_file(self):
        path = self._write("system:\n  cache_size: 2\n")
        config = load_run_config(config_path=path, preset='tiny', preset_dir=settings.CRAN_PRESET_DIR)
        self.assertEqual(config.scenario.num_rrhs, 2)
        self.assertEqual(config.scenario.cache_size, 2)

    def test_unknown_preset(self):
        with self.assertRaises(ValidationError) as ctx:
            load_run_config(preset='huge', preset_dir=settings.CRAN_PRESET_DIR)
        self.assertIn("desk", str(ctx.exception))

    def test_unknown_key(self):
        with self.assertRaises(ValidationError) as ctx:
            load_run_config(overrides=['system.num_user=4'])
        self.assertIn("num_user", str(ctx.exception))
        self.assertIn('system.num_user', ctx.exception.message_dict)

    def test_invalid_section_value(self):
        for override, key in (('system.num_users=0', 'system.num_users'), ('solver.tol=0', 'solver.tol'),
                              ('channel.num_taps=many', 'channel.num_taps')):
            with self.assertRaises(ValidationError) as ctx:
                load_run_config(overrides=[override])
            self.assertIn(key, ctx.exception.message_dict)

    def test_unitless_quantity(self):
        with self.assertRaises(ValidationError):
            load_run_config(overrides=['system.bandwidth=20000000'])

    def test_cache_larger_than_catalogue(self):
        with self.assertRaises(ValidationError):
            load_run_config(overrides=['system.num_contents=4', 'system.cache_size=5'])

    def test_malformed_override(self):
        with self.assertRaises(ValidationError):
            load_run_config(overrides=['system.num_users'])

    def test_override_into_scalar(self):
        with self.assertRaises(ValidationError):
            apply_overrides({'seed': 1}, ['seed.value=2'])

    def test_list_overrides(self):
        data = apply_overrides({}, ['sweep.values=30 Mbps, 40 Mbps', 'sweep.strategies=none'])
        self.assertEqual(data['sweep'], {'values': ['30 Mbps', '40 Mbps'], 'strategies': ['none']})

    def test_sweep_section(self):
        config = load_run_config(preset='desk', preset_dir=settings.CRAN_PRESET_DIR)
        self.assertEqual(config.sweep['param'], 'fronthaul_capacity')
        self.assertEqual(config.sweep['values'][0], 30e6)
        self.assertEqual(config.sweep['num_drops'], 20)

    def test_invalid_yaml(self):
        with self.assertRaises(ValidationError):
            load_run_config(config_path=self._write("system: [unclosed\n"))

    def test_missing_file(self):
        with self.assertRaises(ValidationError):
            load_run_config(config_path=str(Path(self.tmp.name) / 'absent.yaml'))

    def test_solver_section(self):
        config = load_run_config(overrides=['solver.mode=greedy', 'solver.gap_floor=1 mW'])
        self.assertEqual(config.solver, {'mode': 'greedy', 'gap_floor': 1e-3})
        with self.assertRaises(ValidationError):
            load_run_config(overrides=['solver.tol=0'])


class SerializationTests(SimpleTestCase):

    def test_interleave(self):
        tensor = np.array([[1 + 2j, -3.5j]])
        self.assertEqual(interleave(tensor), [[1.0, 2.0, 0.0, -3.5]])
        np.testing.assert_array_equal(deinterleave(interleave(tensor)), tensor)

    def test_odd_interleaved_length(self):
        with self.assertRaises(ValidationError):
            deinterleave([1.0, 2.0, 3.0])

    def test_render_is_indented_and_terminated(self):
        payload = render_json({'b': 0.1, 'a': [1, 2]})
        self.assertTrue(payload.endswith(b"}\n"))
        self.assertIn(b'\n  "b": 0.1,', payload)
        self.assertEqual(parse_json(payload), {'b': 0.1, 'a': [1, 2]})

    def test_malformed_json(self):
        with self.assertRaises(ValidationError):
            parse_json(b"{not json")

    def test_flatten_nested_errors(self):
        errors = {
            'system': {'num_users': ["Ensure this value is greater than or equal to 1."]},
            'sweep': {'values': {1: ["not a rate"]}},
            'seed': ["A valid integer is required."],
            'content': {},
        }
        self.assertEqual(flatten_errors(errors), {
            'system.num_users': ["Ensure this value is greater than or equal to 1."],
            'sweep.values.1': ["not a rate"],
            'seed': ["A valid integer is required."],
        })
        self.assertEqual(flatten_errors(["bad input"]), {NON_FIELD_ERRORS: ["bad input"]})
        self.assertEqual(flatten_errors({'rows': [{}, {'a': ["x"]}]}), {'rows.1.a': ["x"]})

    def test_header(self):
        check_header({'format': 'cran-scenario', 'version': 1}, 'cran-scenario', {1})
        with self.assertRaises(ValidationError):
            check_header({'format': 'cran-scenario', 'version': 2}, 'cran-scenario', {1})
        with self.assertRaises(ValidationError):
            check_header([], 'cran-scenario', {1})


class ReportPDFTests(SimpleTestCase):

    def test_cells(self):
        self.assertEqual(format_cell(None), 'n/a')
        self.assertEqual(format_cell(0.123456789), '0.123457')
        self.assertEqual(format_cell(True), 'yes')
        self.assertEqual(len(format_cell("x" * 100)), 40)

    def test_pages(self):
        rows = [{'a': i, 'b': i / 3} for i in range(2 * ROWS_PER_PAGE + 1)]
        payload = TabularPDF("Rows", rows).generate()
        self.assertTrue(payload.startswith(b"%PDF"))
        self.assertEqual(len(re.findall(rb"/Type /Page(?!s)", payload)), 3)

    def test_deterministic(self):
        rows = [{'strategy': 'none', 'value': 1.5}]
        self.assertEqual(TabularPDF("Rows", rows, metadata={'seed': 1}).generate(),
                         TabularPDF("Rows", rows, metadata={'seed': 1}).generate())


class CommandBaseTests(SimpleTestCase):

    def test_epilog_lists_every_code(self):
        epilog = exit_code_epilog()
        for code in (exit_codes.OK, exit_codes.INFEASIBLE, exit_codes.UNCONVERGED, exit_codes.INVALID_INPUT,
                     exit_codes.GUARD_REFUSED):
            self.assertIn(f"{code}: ", epilog)

    def test_describe(self):
        self.assertEqual(CranCommand.describe(ValidationError({'seed': "too large"})), "seed: too large")
        self.assertEqual(CranCommand.describe(ValidationError("bad input")), "bad input")
