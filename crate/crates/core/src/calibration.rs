//! Estimation of market constants from yearly sector records and provider
//! size histograms, and pinning of the curve normalizations to an observed
//! equilibrium.

use std::path::Path;

use crate::curves::{CurveMode, DemandSide};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::scalar::Real;

/// One year of client-sector data.
#[derive(Debug, Clone, PartialEq)]
pub struct YearRecord {
    pub year: i32,
    pub firm_count: f64,
    pub total_revenue: f64,
    pub births: f64,
    pub entrant_revenue_mean: f64,
    /// Source line, when loaded from a file.
    pub line: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizeBucket {
    pub size: f64,
    pub provider_count: f64,
    pub line: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSeries {
    records: Vec<YearRecord>,
    histogram: Option<Vec<SizeBucket>>,
}

fn locate(r: &YearRecord) -> String {
    match r.line {
        Some(l) => format!("year {} (line {l})", r.year),
        None => format!("year {}", r.year),
    }
}

impl CalibrationSeries {
    /// Validates positivity and that years are consecutive.
    pub fn new(records: Vec<YearRecord>, histogram: Option<Vec<SizeBucket>>) -> Result<Self> {
        for r in &records {
            let fields = [
                ("firm_count", r.firm_count, true),
                ("total_revenue", r.total_revenue, true),
                ("births", r.births, false),
                ("entrant_revenue_mean", r.entrant_revenue_mean, true),
            ];
            for (name, value, strict) in fields {
                let ok = value.is_finite() && if strict { value > 0.0 } else { value >= 0.0 };
                if !ok {
                    return Err(Error::Data(format!(
                        "{}: {name} = {value} must be {}",
                        locate(r),
                        if strict { "positive" } else { "non-negative" }
                    )));
                }
            }
        }
        if let Some(w) = records.windows(2).find(|w| w[1].year != w[0].year + 1) {
            return Err(Error::Data(format!(
                "{}: years must be consecutive (previous record is year {})",
                locate(&w[1]),
                w[0].year
            )));
        }
        Ok(CalibrationSeries { records, histogram })
    }

    pub fn records(&self) -> &[YearRecord] {
        &self.records
    }

    pub fn histogram(&self) -> Option<&[SizeBucket]> {
        self.histogram.as_deref()
    }

    pub fn with_histogram(mut self, histogram: Vec<SizeBucket>) -> Self {
        self.histogram = Some(histogram);
        self
    }
}

/// Continuous yearly rates recovered from a series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub psi: f64,
    pub alpha: f64,
    pub r_m: f64,
}

/// Estimates client revenue growth, birth rate and entrant revenue.
///
/// For each pair of consecutive years, births are measured against the
/// prior-year firm count and incumbent revenue (total minus entrants)
/// against prior-year total revenue. Growth factors are averaged
/// geometrically and reported as continuous rates; `r_m` is the geometric
/// mean of entrant revenues.
pub fn estimate_rates(series: &CalibrationSeries) -> Result<Rates> {
    let recs = series.records();
    if recs.len() < 3 {
        return Err(Error::Data(format!(
            "insufficient records: rate estimation needs at least 3 years, got {}",
            recs.len()
        )));
    }
    let pairs = (recs.len() - 1) as f64;
    let mut log_births = 0.0;
    let mut log_growth = 0.0;
    for w in recs.windows(2) {
        let (prev, cur) = (&w[0], &w[1]);
        let birth_factor = 1.0 + cur.births / prev.firm_count;
        let incumbent = cur.total_revenue - cur.births * cur.entrant_revenue_mean;
        if !(incumbent > 0.0) {
            return Err(Error::Data(format!(
                "{}: incumbent revenue {incumbent} is not positive",
                locate(cur)
            )));
        }
        log_births += birth_factor.ln();
        log_growth += (incumbent / prev.total_revenue).ln();
    }
    let log_entrant: f64 =
        recs.iter().map(|r| r.entrant_revenue_mean.ln()).sum::<f64>() / recs.len() as f64;
    Ok(Rates {
        psi: log_growth / pairs,
        alpha: log_births / pairs,
        r_m: log_entrant.exp(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZipfFit {
    pub g0: f64,
    /// Root-mean-square log residual.
    pub residual: f64,
}

/// Fits `count = g0 / size` by least squares in log space.
pub fn fit_zipf(histogram: &[SizeBucket]) -> Result<ZipfFit> {
    if histogram.len() < 4 {
        return Err(Error::Data(format!(
            "Zipf fit needs at least 4 size buckets, got {}",
            histogram.len()
        )));
    }
    for b in histogram {
        if !(b.size > 0.0 && b.provider_count > 0.0) || !b.size.is_finite() || !b.provider_count.is_finite() {
            let at = b.line.map(|l| format!("line {l}: ")).unwrap_or_default();
            return Err(Error::Data(format!(
                "{at}size {} with provider_count {} (both must be positive)",
                b.size, b.provider_count
            )));
        }
    }
    let m = histogram.len() as f64;
    let log_g0 = histogram
        .iter()
        .map(|b| b.provider_count.ln() + b.size.ln())
        .sum::<f64>()
        / m;
    let sq: f64 = histogram
        .iter()
        .map(|b| {
            let r = b.provider_count.ln() - (log_g0 - b.size.ln());
            r * r
        })
        .sum();
    Ok(ZipfFit {
        g0: log_g0.exp(),
        residual: (sq / m).sqrt(),
    })
}

/// Client benefit factor from the share of revenue spent on overheads and
/// the fraction of it an engagement saves.
pub fn derive_v(sga_share: f64, savings_rate: f64) -> Result<f64> {
    for (name, x) in [("sga_share", sga_share), ("savings_rate", savings_rate)] {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::domain(name, x, "[0, 1]"));
        }
    }
    Ok(sga_share * savings_rate)
}

/// Observed equilibrium at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorConditions<T> {
    pub served0: T,
    pub price0: T,
}

impl AnchorConditions<f64> {
    /// 7500 served clients at 37k per engagement.
    pub fn german() -> Self {
        AnchorConditions {
            served0: 7500.0,
            price0: 37_000.0,
        }
    }
}

impl<T: Real> AnchorConditions<T> {
    pub fn validate(&self, params: &ModelParams<T>) -> Result<()> {
        if !(self.served0 > T::zero()) || !self.served0.is_finite() {
            return Err(Error::domain("served0", self.served0.as_f64(), "(0, inf)"));
        }
        let (floor, top) = (params.cost_floor(), params.local_cost());
        if !(self.price0 > floor && self.price0 < top) {
            return Err(Error::domain(
                "price0",
                self.price0.as_f64(),
                format!("({}, {})", floor.as_f64(), top.as_f64()),
            ));
        }
        Ok(())
    }
}

/// Demand and supply normalizations `(F0, g0)` under which the closed-form
/// curves both serve `served0` clients at `price0` when `t = 0`.
/// Incoming `F0` and `g0` are ignored.
pub fn anchor_normalizations<T: Real>(
    params: &ModelParams<T>,
    anchors: &AnchorConditions<T>,
) -> Result<(T, T)> {
    let unit = ModelParams {
        f0: T::one(),
        g0: T::one(),
        ..*params
    };
    unit.validate()?;
    anchors.validate(&unit)?;
    let per_unit_demand = DemandSide::new(unit)?.demand_at(T::zero(), anchors.price0, CurveMode::Closed)?;
    let f0 = anchors.served0 / per_unit_demand;
    let share = T::one() + (anchors.price0 - unit.local_cost()) / (unit.n * unit.delta_c);
    let g0 = anchors.served0 * unit.n * unit.beta / share;
    Ok((f0, g0))
}

/// `params` with `F0` and `g0` pinned by the anchors.
pub fn anchored<T: Real>(params: &ModelParams<T>, anchors: &AnchorConditions<T>) -> Result<ModelParams<T>> {
    let (f0, g0) = anchor_normalizations(params, anchors)?;
    ModelParams { f0, g0, ..*params }.validated()
}

/// German transportation scenario with the given provider growth rate.
pub fn german_scenario(mu: f64) -> Result<ModelParams<f64>> {
    anchored(
        &ModelParams {
            mu,
            ..ModelParams::german_baseline()
        },
        &AnchorConditions::german(),
    )
}

const SERIES_COLUMNS: [&str; 5] = [
    "year",
    "firm_count",
    "total_revenue",
    "births",
    "entrant_revenue_mean",
];

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line());
    match (e.into_kind(), line) {
        (csv::ErrorKind::Io(source), _) => Error::Io {
            path: path.display().to_string(),
            source,
        },
        (kind, Some(line)) => Error::DataAt {
            path: path.display().to_string(),
            line,
            msg: format!("{kind:?}"),
        },
        (kind, None) => Error::Data(format!("{}: {kind:?}", path.display())),
    }
}

fn column_indices<const N: usize>(
    path: &Path,
    headers: &csv::StringRecord,
    required: [&str; N],
) -> Result<[usize; N]> {
    let mut idx = [0; N];
    for (slot, name) in idx.iter_mut().zip(required) {
        *slot = headers.iter().position(|h| h == name).ok_or_else(|| Error::DataAt {
            path: path.display().to_string(),
            line: 1,
            msg: format!("missing required column `{name}`"),
        })?;
    }
    Ok(idx)
}

fn parse_field<F: std::str::FromStr>(path: &Path, line: u64, record: &csv::StringRecord, i: usize, name: &str) -> Result<F> {
    let raw = record.get(i).unwrap_or("");
    raw.parse().map_err(|_| Error::DataAt {
        path: path.display().to_string(),
        line,
        msg: format!("cannot parse {name} from `{raw}`"),
    })
}

/// Reads yearly records from a CSV file with header
/// `year,firm_count,total_revenue,births,entrant_revenue_mean`.
pub fn load_series(path: impl AsRef<Path>) -> Result<CalibrationSeries> {
    let path = path.as_ref();
    let mut reader = open_csv(path)?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let idx = column_indices(path, &headers, SERIES_COLUMNS)?;
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let num = |k: usize| parse_field::<f64>(path, line, &row, idx[k], SERIES_COLUMNS[k]);
        let rec = YearRecord {
            year: parse_field(path, line, &row, idx[0], "year")?,
            firm_count: num(1)?,
            total_revenue: num(2)?,
            births: num(3)?,
            entrant_revenue_mean: num(4)?,
            line: Some(line),
        };
        // validate row by row so the error names the offending line
        CalibrationSeries::new(vec![rec.clone()], None).map_err(|e| Error::DataAt {
            path: path.display().to_string(),
            line,
            msg: e.to_string(),
        })?;
        records.push(rec);
    }
    if records.len() < 3 {
        return Err(Error::Data(format!(
            "{}: insufficient records: need at least 3 yearly rows, got {}",
            path.display(),
            records.len()
        )));
    }
    CalibrationSeries::new(records, None)
}

/// Reads a provider size histogram with header `size,provider_count`.
pub fn load_histogram(path: impl AsRef<Path>) -> Result<Vec<SizeBucket>> {
    let path = path.as_ref();
    let mut reader = open_csv(path)?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let idx = column_indices(path, &headers, ["size", "provider_count"])?;
    let mut buckets = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        buckets.push(SizeBucket {
            size: parse_field(path, line, &row, idx[0], "size")?,
            provider_count: parse_field(path, line, &row, idx[1], "provider_count")?,
            line: Some(line),
        });
    }
    Ok(buckets)
}
