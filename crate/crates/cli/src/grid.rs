//! Grid specifications for tabulating moments over one or two free times.

use std::io::Write;
use std::str::FromStr;

use crate::CliError;

/// Largest number of free axes in a grid.
pub const MAX_FREE: usize = 2;

/// One time slot: fixed, or `steps` equally spaced points on `[start, stop]`.
#[derive(Debug, Clone, PartialEq)]
pub enum GridVar {
    Fixed(f64),
    Range { start: f64, stop: f64, steps: usize },
}

impl GridVar {
    fn values(&self) -> Vec<f64> {
        match *self {
            GridVar::Fixed(t) => vec![t],
            GridVar::Range { start, stop, steps: 1 } if start == stop => vec![start],
            GridVar::Range { start, stop, steps } => {
                let h = (stop - start) / (steps - 1) as f64;
                (0..steps).map(|i| if i + 1 == steps { stop } else { start + h * i as f64 }).collect()
            }
        }
    }
}

impl FromStr for GridVar {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let num = |p: &str| p.trim().parse::<f64>().map_err(|_| format!("not a number: `{p}` in `{s}`"));
        let check = |t: f64| {
            if t.is_finite() && t >= 0.0 {
                Ok(t)
            } else {
                Err(format!("grid times must be finite and >= 0 in `{s}`"))
            }
        };
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [t] => Ok(GridVar::Fixed(check(num(t)?)?)),
            [start, stop, steps] => {
                let start = check(num(start)?)?;
                let stop = check(num(stop)?)?;
                let steps: usize = steps.trim().parse().map_err(|_| format!("bad step count in `{s}`"))?;
                if steps == 0 || (steps == 1 && start != stop) {
                    return Err(format!("`{s}` needs at least 2 steps (or start == stop)"));
                }
                if stop < start {
                    return Err(format!("range `{s}` runs backwards"));
                }
                Ok(GridVar::Range { start, stop, steps })
            }
            _ => Err(format!("expected `t` or `start:stop:steps`, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridSpec {
    vars: Vec<GridVar>,
}

impl GridSpec {
    pub fn new(vars: Vec<GridVar>) -> Result<Self, String> {
        let free = vars.iter().filter(|v| matches!(v, GridVar::Range { .. })).count();
        if free > MAX_FREE {
            return Err(format!("at most {MAX_FREE} free variables per grid, got {free}"));
        }
        Ok(Self { vars })
    }

    /// Indices of the free slots, named `t1..tn` by position.
    fn free_slots(&self) -> Vec<usize> {
        (0..self.vars.len()).filter(|&i| matches!(self.vars[i], GridVar::Range { .. })).collect()
    }

    /// Every time tuple on the grid; the last free axis varies fastest.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = self.vars.iter().map(GridVar::values).collect();
        let mut out = vec![Vec::with_capacity(axes.len())];
        for axis in &axes {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    axis.iter().map(move |&t| {
                        let mut p = prefix.clone();
                        p.push(t);
                        p
                    })
                })
                .collect();
        }
        out
    }
}

/// Writes a CSV with one column per free slot plus `value`, numbers in
/// shortest round-trip form. An all-fixed grid gives a single row.
pub fn write_grid<W, F>(spec: &GridSpec, mut eval: F, out: W) -> Result<(), CliError>
where
    W: Write,
    F: FnMut(&[f64]) -> Result<f64, CliError>,
{
    let free = spec.free_slots();
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = free.iter().map(|i| format!("t{}", i + 1)).collect();
    header.push("value".to_string());
    w.write_record(&header).map_err(csv_err)?;
    for point in spec.points() {
        let value = eval(&point)?;
        let mut row: Vec<String> = free.iter().map(|&i| point[i].to_string()).collect();
        row.push(value.to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}
