use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub class: usize,
    pub name: String,
    pub support: usize,
    /// `None` when nothing was predicted as this class.
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metrics {
    pub samples: usize,
    pub correct: usize,
    pub accuracy: f64,
    /// `confusion[i][j]`: samples of class `i` predicted as `j`.
    pub confusion: Vec<Vec<usize>>,
    pub per_class: Vec<ClassMetrics>,
}

impl Metrics {
    pub fn compute(truth: &[usize], predicted: &[usize], class_names: &[String]) -> Self {
        assert_eq!(truth.len(), predicted.len());
        let k = class_names.len();
        let mut confusion = vec![vec![0usize; k]; k];
        for (&t, &p) in truth.iter().zip(predicted) {
            confusion[t][p] += 1;
        }
        let correct = (0..k).map(|i| confusion[i][i]).sum();
        let per_class = (0..k)
            .map(|c| {
                let support: usize = confusion[c].iter().sum();
                let predicted_as: usize = (0..k).map(|i| confusion[i][c]).sum();
                let hit = confusion[c][c] as f64;
                ClassMetrics {
                    class: c,
                    name: class_names[c].clone(),
                    support,
                    precision: (predicted_as > 0).then(|| hit / predicted_as as f64),
                    recall: (support > 0).then(|| hit / support as f64),
                }
            })
            .collect();
        Metrics {
            samples: truth.len(),
            correct,
            accuracy: if truth.is_empty() { 0.0 } else { correct as f64 / truth.len() as f64 },
            confusion,
            per_class,
        }
    }

    /// Confusion matrix with the diagonal cleared: only misclassifications.
    pub fn misclassification_counts(&self) -> Vec<Vec<usize>> {
        let mut m = self.confusion.clone();
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 0;
        }
        m
    }

    pub fn confusion_csv(&self, class_names: &[String]) -> String {
        matrix_csv(&self.confusion, class_names)
    }
}

pub fn matrix_csv(m: &[Vec<usize>], class_names: &[String]) -> String {
    let mut out = String::from("true\\predicted");
    for n in class_names {
        out.push(',');
        out.push_str(&csv_field(n));
    }
    out.push('\n');
    for (row, name) in m.iter().zip(class_names) {
        out.push_str(&csv_field(name));
        for v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| i.to_string()).collect()
    }

    #[test]
    fn perfect_predictions() {
        let m = Metrics::compute(&[0, 1, 2], &[0, 1, 2], &names(3));
        assert_eq!(m.accuracy, 1.0);
        assert!(m.per_class.iter().all(|c| c.precision == Some(1.0) && c.recall == Some(1.0)));
    }

    #[test]
    fn misclassification_rows_sum_to_errors() {
        let truth = [0, 0, 0, 1, 1, 2, 2, 2, 2];
        let pred = [0, 1, 2, 1, 0, 2, 2, 0, 0];
        let m = Metrics::compute(&truth, &pred, &names(3));
        let mis = m.misclassification_counts();
        for c in 0..3 {
            let errors = truth.iter().zip(&pred).filter(|(&t, &p)| t == c && p != c).count();
            assert_eq!(mis[c].iter().sum::<usize>(), errors);
        }
        assert_eq!(m.correct, 4);
        assert_eq!(m.per_class[0].precision, Some(1.0 / 4.0));
    }

    #[test]
    fn missing_class_has_no_precision() {
        let m = Metrics::compute(&[0, 0], &[0, 0], &names(2));
        assert_eq!(m.per_class[1].precision, None);
        assert_eq!(m.per_class[1].recall, None);
    }

    #[test]
    fn csv_quotes_names() {
        let csv = matrix_csv(&[vec![1]], &["a,b".to_string()]);
        assert_eq!(csv, "true\\predicted,\"a,b\"\n\"a,b\",1\n");
    }
}
