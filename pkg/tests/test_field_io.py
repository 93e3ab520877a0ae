import tempfile
import unittest
from pathlib import Path

import numpy as np

from util.field_io import format_csv, read_field, write_field
from util.grid import Field


class FieldIoTest(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)
        rng = np.random.default_rng(3)
        self.field = Field.from_array(rng.standard_normal((4, 5, 2)), p=2)

    def tearDown(self):
        self.tmp.cleanup()

    def test_csv_keeps_every_bit(self):
        path = self.dir / 'f.csv'
        write_field(self.field, path)
        back = read_field(path)
        self.assertEqual(back.shape, (4, 5))
        self.assertEqual(back.p, 2)
        np.testing.assert_array_equal(back.values, self.field.values)

    def test_binary_keeps_every_bit(self):
        path = self.dir / 'f.bin'
        write_field(self.field, path)
        np.testing.assert_array_equal(read_field(path).values, self.field.values)

    def test_csv_layout(self):
        text = format_csv(Field.from_flat((1, 2), 1, [0.5, -1.0]))
        self.assertEqual(text.splitlines(), ['q,shape,p', '2,1x2,1', '0.5', '-1'])

    def test_trailing_metadata_is_ignored(self):
        path = self.dir / 'meta.csv'
        path.write_text('q,shape,p\n1,3,1\n1\n2\n3\n# seed=7\n')
        np.testing.assert_array_equal(read_field(path).data, [1, 2, 3])

    def test_bad_header(self):
        path = self.dir / 'bad.csv'
        path.write_text('x,y\n1,3,1\n1\n')
        with self.assertRaises(ValueError):
            read_field(path)

    def test_wrong_row_count(self):
        path = self.dir / 'short.csv'
        path.write_text('q,shape,p\n1,3,1\n1\n2\n')
        with self.assertRaises(ValueError):
            read_field(path)

    def test_truncated_binary(self):
        full = self.dir / 'full.bin'
        write_field(self.field, full)
        raw = full.read_bytes()
        for name, cut in [('magic_only.bin', 10), ('half_shape.bin', 20), ('short_data.bin', len(raw) - 8)]:
            path = self.dir / name
            path.write_bytes(raw[:cut])
            with self.subTest(name=name):
                with self.assertRaises(ValueError):
                    read_field(path)

    def test_bad_magic(self):
        path = self.dir / 'other.bin'
        path.write_bytes(b'NOTAFILE' + bytes(16))
        with self.assertRaises(ValueError):
            read_field(path)


if __name__ == '__main__':
    unittest.main()
