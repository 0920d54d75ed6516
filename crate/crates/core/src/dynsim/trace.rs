use std::io::{self, Write};

/// Uniformly sampled named channels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub times: Vec<f64>,
    pub channels: Vec<Channel>,
    /// Integration steps per stored sample.
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub name: String,
    pub values: Vec<f64>,
}

impl Trace {
    pub fn new(names: Vec<String>, stride: usize) -> Self {
        Trace {
            times: Vec::new(),
            channels: names
                .into_iter()
                .map(|name| Channel {
                    name,
                    values: Vec::new(),
                })
                .collect(),
            stride,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, t: f64, values: &[f64]) {
        debug_assert_eq!(values.len(), self.channels.len());
        self.times.push(t);
        for (c, &v) in self.channels.iter_mut().zip(values) {
            c.values.push(v);
        }
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channels
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.values.as_slice())
    }

    pub fn channel_names(&self) -> impl Iterator<Item = &str> {
        self.channels.iter().map(|c| c.name.as_str())
    }

    /// Sample spacing, seconds.
    pub fn sample_interval(&self) -> Option<f64> {
        if self.times.len() < 2 {
            None
        } else {
            Some((self.times[self.times.len() - 1] - self.times[0]) / (self.times.len() - 1) as f64)
        }
    }

    /// CSV with a `time,<channel>...` header; time with 6 decimals.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "time")?;
        for c in &self.channels {
            write!(w, ",{}", c.name)?;
        }
        writeln!(w)?;
        for (k, t) in self.times.iter().enumerate() {
            write!(w, "{t:.6}")?;
            for c in &self.channels {
                write!(w, ",{:.9}", c.values[k])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Keeps every `stride`-th sample. The last sample is always retained so the
/// time span is preserved.
pub fn resample(trace: &Trace, stride: usize) -> Trace {
    assert!(stride >= 1, "stride must be at least 1");
    if stride == 1 || trace.is_empty() {
        return trace.clone();
    }
    let n = trace.len();
    let mut keep: Vec<usize> = (0..n).step_by(stride).collect();
    if *keep.last().unwrap() != n - 1 {
        keep.push(n - 1);
    }
    Trace {
        times: keep.iter().map(|&k| trace.times[k]).collect(),
        channels: trace
            .channels
            .iter()
            .map(|c| Channel {
                name: c.name.clone(),
                values: keep.iter().map(|&k| c.values[k]).collect(),
            })
            .collect(),
        stride: trace.stride * stride,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize) -> Trace {
        let mut t = Trace::new(vec!["a.angle".into(), "a.p".into()], 1);
        for k in 0..n {
            let x = k as f64 * 1e-3;
            t.push(x, &[x * 2.0, 1.0]);
        }
        t
    }

    #[test]
    fn stride_one_is_identity() {
        let t = ramp(17);
        assert_eq!(resample(&t, 1), t);
    }

    #[test]
    fn stride_ten_counts_and_keeps_ends() {
        let t = ramp(10_001);
        let r = resample(&t, 10);
        assert_eq!(r.len(), 1_001);
        assert_eq!(r.times[0], t.times[0]);
        assert_eq!(r.times.last(), t.times.last());
        assert_eq!(r.stride, 10);
    }

    #[test]
    fn csv_layout() {
        let t = ramp(2);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = s.lines().collect();
        assert_eq!(lines[0], "time,a.angle,a.p");
        assert!(lines[2].starts_with("0.001000,"));
    }
}
