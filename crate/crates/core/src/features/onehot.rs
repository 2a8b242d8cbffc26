use serde::{Deserialize, Serialize};

/// Category lists per categorical feature, in first-seen order over the
/// fitting partition.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OneHotVocabulary {
    pub features: Vec<CategoricalFeature>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalFeature {
    pub name: String,
    pub categories: Vec<String>,
}

/// A value absent from the fitted vocabulary; encoded as an all-zero block.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UnseenCategory {
    pub feature: String,
    pub value: String,
}

impl OneHotVocabulary {
    /// Collects categories of each named feature from `rows`, where
    /// `rows[i][f]` is row i's value of feature f.
    pub fn fit<S: AsRef<str>>(names: &[&str], rows: &[Vec<S>]) -> Self {
        let mut features: Vec<CategoricalFeature> = names
            .iter()
            .map(|n| CategoricalFeature {
                name: n.to_string(),
                categories: Vec::new(),
            })
            .collect();
        for row in rows {
            for (feature, value) in features.iter_mut().zip(row) {
                let value = value.as_ref();
                if !feature.categories.iter().any(|c| c == value) {
                    feature.categories.push(value.to_string());
                }
            }
        }
        Self { features }
    }

    pub fn width(&self) -> usize {
        self.features.iter().map(|f| f.categories.len()).sum()
    }

    /// Encodes one row into `out`; returns the values missing from the
    /// vocabulary.
    pub fn encode_into<S: AsRef<str>>(&self, row: &[S], out: &mut Vec<f64>) -> Vec<UnseenCategory> {
        let mut unseen = Vec::new();
        for (feature, value) in self.features.iter().zip(row) {
            let value = value.as_ref();
            let start = out.len();
            out.resize(start + feature.categories.len(), 0.0);
            match feature.categories.iter().position(|c| c == value) {
                Some(p) => out[start + p] = 1.0,
                None => unseen.push(UnseenCategory {
                    feature: feature.name.clone(),
                    value: value.to_string(),
                }),
            }
        }
        unseen
    }

    pub fn encode<S: AsRef<str>>(&self, row: &[S]) -> (Vec<f64>, Vec<UnseenCategory>) {
        let mut out = Vec::with_capacity(self.width());
        let unseen = self.encode_into(row, &mut out);
        (out, unseen)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_seen_order() {
        let v = OneHotVocabulary::fit(&["proto"], &[vec!["tcp"], vec!["udp"], vec!["tcp"]]);
        assert_eq!(v.features[0].categories, ["tcp", "udp"]);
        let again = OneHotVocabulary::fit(&["proto"], &[vec!["tcp"], vec!["udp"], vec!["tcp"]]);
        assert_eq!(v, again);
    }

    #[test]
    fn unknown_service_is_a_category() {
        let v = OneHotVocabulary::fit(&["service"], &[vec!["dns"], vec!["unknown"]]);
        assert_eq!(v.encode(&["unknown"]).0, vec![0.0, 1.0]);
    }

    #[test]
    fn encodes_known_and_unseen() {
        let v = OneHotVocabulary::fit(&["proto"], &[vec!["tcp"], vec!["udp"]]);
        assert_eq!(v.encode(&["tcp"]), (vec![1.0, 0.0], vec![]));
        let (values, unseen) = v.encode(&["icmp"]);
        assert_eq!(values, vec![0.0, 0.0]);
        assert_eq!(unseen.len(), 1);
        let abc = OneHotVocabulary::fit(&["x"], &[vec!["a"], vec!["b"], vec!["c"]]);
        assert_eq!(abc.encode(&["c"]).0, vec![0.0, 0.0, 1.0]);
    }
}
