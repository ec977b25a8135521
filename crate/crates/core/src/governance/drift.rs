use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftSource {
    KpmDegradation,
    AccuracyDrop,
    Announcement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSignal {
    pub source: DriftSource,
    /// Non-negative size of the drop: absolute for accuracy, relative for
    /// KPM aggregates.
    pub magnitude: f64,
    /// Time span of the test window, seconds.
    pub window: (f64, f64),
    /// Set once the strategic tier has ruled out policy causes.
    pub explanation_checked: bool,
}

impl DriftSignal {
    pub fn announcement(t: f64) -> Self {
        Self {
            source: DriftSource::Announcement,
            magnitude: 0.0,
            window: (t, t),
            explanation_checked: true,
        }
    }

    /// Start of the degraded window.
    pub fn onset(&self) -> f64 {
        self.window.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    Accuracy,
    Kpm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftConfig {
    pub baseline_window: usize,
    pub test_window: usize,
    /// Absolute drop that flags an accuracy series.
    pub accuracy_threshold: f64,
    /// Relative drop that flags a KPM series.
    pub kpm_threshold: f64,
}

impl Default for DriftConfig {
    fn default() -> Self {
        Self {
            baseline_window: 5,
            test_window: 3,
            accuracy_threshold: 0.1,
            kpm_threshold: 0.2,
        }
    }
}

fn mean(xs: &[(f64, f64)]) -> f64 {
    xs.iter().map(|x| x.1).sum::<f64>() / xs.len() as f64
}

/// Compares the trailing test window of `series` (time, value pairs, oldest
/// first) with the baseline window just before it.
pub fn detect_drift(
    series: &[(f64, f64)],
    kind: SeriesKind,
    config: &DriftConfig,
) -> Option<DriftSignal> {
    let (b, w) = (config.baseline_window.max(1), config.test_window.max(1));
    if series.len() < b + w {
        return None;
    }
    let tail = &series[series.len() - b - w..];
    let (baseline, test) = tail.split_at(b);
    let (base, now) = (mean(baseline), mean(test));
    let (magnitude, threshold, source) = match kind {
        SeriesKind::Accuracy => (
            base - now,
            config.accuracy_threshold,
            DriftSource::AccuracyDrop,
        ),
        SeriesKind::Kpm => {
            if base <= 0.0 {
                return None;
            }
            (
                (base - now) / base,
                config.kpm_threshold,
                DriftSource::KpmDegradation,
            )
        }
    };
    (magnitude > threshold).then(|| DriftSignal {
        source,
        magnitude,
        window: (test[0].0, test[test.len() - 1].0),
        explanation_checked: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(values: &[f64]) -> Vec<(f64, f64)> {
        values
            .iter()
            .enumerate()
            .map(|(i, v)| (i as f64 * 60.0, *v))
            .collect()
    }

    #[test]
    fn flat_series_is_quiet() {
        assert!(detect_drift(
            &series(&[0.9; 8]),
            SeriesKind::Accuracy,
            &DriftConfig::default()
        )
        .is_none());
        assert!(
            detect_drift(&series(&[5.0; 8]), SeriesKind::Kpm, &DriftConfig::default()).is_none()
        );
    }

    #[test]
    fn accuracy_drop() {
        let s = series(&[0.95, 0.95, 0.95, 0.95, 0.95, 0.70, 0.70, 0.70]);
        let d = detect_drift(&s, SeriesKind::Accuracy, &DriftConfig::default()).unwrap();
        assert_eq!(d.source, DriftSource::AccuracyDrop);
        assert!((d.magnitude - 0.25).abs() < 1e-12);
        assert!(!d.explanation_checked);
        assert_eq!(d.window, (300.0, 420.0));
    }

    #[test]
    fn kpm_threshold_is_relative() {
        let dip = |f: f64| series(&[10.0, 10.0, 10.0, 10.0, 10.0, 10.0 * f, 10.0 * f, 10.0 * f]);
        assert!(detect_drift(&dip(0.85), SeriesKind::Kpm, &DriftConfig::default()).is_none());
        let d = detect_drift(&dip(0.7), SeriesKind::Kpm, &DriftConfig::default()).unwrap();
        assert!((d.magnitude - 0.3).abs() < 1e-12);
    }

    #[test]
    fn short_series() {
        assert!(detect_drift(
            &series(&[1.0, 0.0]),
            SeriesKind::Accuracy,
            &DriftConfig::default()
        )
        .is_none());
    }
}
