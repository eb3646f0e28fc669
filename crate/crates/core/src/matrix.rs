use serde::{Deserialize, Serialize};

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix data length");
        Matrix { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix { rows, cols, data }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Bilinear resize with corner alignment: output corners sample the
    /// input corners exactly.
    pub fn resize_bilinear(&self, rows: usize, cols: usize) -> Matrix {
        let scale = |n_in: usize, n_out: usize| {
            if n_out <= 1 || n_in <= 1 {
                0.0
            } else {
                (n_in - 1) as f64 / (n_out - 1) as f64
            }
        };
        let sy = scale(self.rows, rows);
        let sx = scale(self.cols, cols);
        Matrix::from_fn(rows, cols, |r, c| {
            let y = r as f64 * sy;
            let x = c as f64 * sx;
            let y0 = (y.floor() as usize).min(self.rows - 1);
            let x0 = (x.floor() as usize).min(self.cols - 1);
            let y1 = (y0 + 1).min(self.rows - 1);
            let x1 = (x0 + 1).min(self.cols - 1);
            let fy = y - y0 as f64;
            let fx = x - x0 as f64;
            let top = self.get(y0, x0) * (1.0 - fx) + self.get(y0, x1) * fx;
            let bottom = self.get(y1, x0) * (1.0 - fx) + self.get(y1, x1) * fx;
            top * (1.0 - fy) + bottom * fy
        })
    }

    /// Row-major CSV, one row per line, LF endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for r in 0..self.rows {
            let line: Vec<String> = self.row(r).iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}
