use hostprint::features::{detect_peaks, PeakConfig};
use hostprint::learners::knn::{KnnModel, Weighting};
use hostprint::learners::metric::DistanceMetric;
use hostprint::learners::svm::{map_features, sim_features};
use hostprint::packet::Timestamp;
use hostprint::synth::{generate, SynthConfig};

pub fn sample_trace(seed: u64, index: usize) -> Vec<f64> {
    let sessions = generate(&SynthConfig { sessions: index + 1, seed, ..SynthConfig::default() });
    let Some(s) = sessions.get(index) else {
        return Vec::new();
    };
    let t0 = s.packets.first().map_or(Timestamp(0), |p| p.0.timestamp);
    s.packets
        .iter()
        .flat_map(|(p, _)| {
            let dir = if (p.src_ip, p.src_port) == s.client { 0.0 } else { 1.0 };
            [p.timestamp.secs_since(t0), f64::from(p.total_ip_len), dir]
        })
        .collect()
}

pub fn bursts(times: &[f64], sizes: &[f64], silence_gap: f64, min_packets: usize) -> Vec<f64> {
    let mut points: Vec<(Timestamp, u32)> =
        times.iter().zip(sizes).map(|(&t, &b)| (Timestamp::from_secs_f64(t), b.max(0.0) as u32)).collect();
    points.sort_by_key(|p| p.0);
    let config = PeakConfig { silence_gap_secs: silence_gap.max(0.0), min_peak_packets: min_packets.max(1) };
    detect_peaks(&points, &config)
        .iter()
        .flat_map(|p| {
            [p.start.as_secs_f64(), p.end.as_secs_f64(), p.packets as f64, p.byte_count as f64, p.throughput()]
        })
        .collect()
}

pub fn similarity_curves(threshold: f64, gamma: f64, max_d: f64, steps: usize) -> Vec<f64> {
    let steps = steps.max(1);
    let anchor = [vec![0.0]];
    let threshold = threshold.max(f64::MIN_POSITIVE);
    (0..=steps)
        .flat_map(|i| {
            let d = max_d * i as f64 / steps as f64;
            let sim = sim_features(&[d], &anchor, threshold, DistanceMetric::Euclidean)[0];
            let map = map_features(&[d], &anchor, gamma, DistanceMetric::Euclidean)[0];
            [d, sim, map]
        })
        .collect()
}

pub fn knn_regions(
    points: &[f64],
    labels: &[u32],
    k: usize,
    weighting: &str,
    metric: &str,
    resolution: usize,
) -> Result<Vec<u8>, String> {
    if points.len() != 2 * labels.len() {
        return Err(format!("{} coordinates for {} labels", points.len(), labels.len()));
    }
    if labels.is_empty() {
        return Ok(vec![u8::MAX; resolution * resolution]);
    }
    let weighting = match weighting {
        "uniform" => Weighting::Uniform,
        "distance" => Weighting::DistanceInverse,
        other => return Err(format!("unknown weighting `{other}`")),
    };
    let metric: DistanceMetric = metric.parse()?;
    let rows: Vec<Vec<f64>> = points.chunks(2).map(<[f64]>::to_vec).collect();
    let labels: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let model = KnnModel::fit(rows, labels, n_classes, k, weighting, metric);
    let cell = |i: usize| (i as f64 + 0.5) / resolution as f64;
    Ok((0..resolution * resolution)
        .map(|i| {
            let (row, col) = (i / resolution, i % resolution);
            model.predict(&[cell(col), 1.0 - cell(row)]) as u8
        })
        .collect())
}
