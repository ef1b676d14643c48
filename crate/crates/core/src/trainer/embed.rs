use std::fs;
use std::path::Path;

use crate::datamodel::{EmbeddingTable, SgnRng, Vocabulary};
use crate::error::{Result, SgnError};
use crate::params::uniform_mat;
use crate::scalar::Scalar;

/// Seeded U(-0.1, 0.1) table; rows for tokens listed in `pretrained`
/// (whitespace-separated `token v1 .. v_dw` lines) are replaced by the file's vector.
pub fn embed_init<T: Scalar>(
    vocab: &Vocabulary,
    d_w: usize,
    pretrained: Option<&Path>,
    rng: &mut SgnRng,
) -> Result<EmbeddingTable<T>> {
    let mut weights = uniform_mat(vocab.len(), d_w, 0.1, rng);
    if let Some(path) = pretrained {
        let text = fs::read_to_string(path).map_err(|e| SgnError::io(path, e))?;
        for (n, line) in text.lines().enumerate() {
            let mut fields = line.split_whitespace();
            let Some(token) = fields.next() else { continue };
            let values: Vec<f64> = fields
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| SgnError::Data(format!("{}:{}: bad vector value", path.display(), n + 1)))?;
            if values.len() != d_w {
                return Err(SgnError::Data(format!(
                    "{}:{}: vector has {} values, d_w is {d_w}",
                    path.display(),
                    n + 1,
                    values.len()
                )));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(SgnError::Data(format!("{}:{}: non-finite vector value", path.display(), n + 1)));
            }
            if let Some(idx) = vocab.get(&token.to_lowercase()) {
                for (dst, &v) in weights.row_mut(idx).iter_mut().zip(&values) {
                    *dst = T::lit(v);
                }
            }
        }
    }
    Ok(EmbeddingTable { weights })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        Vocabulary::from_words(["cat", "dog", "runs"]).unwrap()
    }

    #[test]
    fn random_rows_stay_inside_init_bounds() {
        let t: EmbeddingTable<f64> = embed_init(&vocab(), 6, None, &mut SgnRng::seed_from_u64(1)).unwrap();
        assert_eq!((t.rows(), t.dim()), (7, 6));
        assert!(t.weights.iter().all(|&x| x > -0.1 && x < 0.1));
    }

    #[test]
    fn file_covering_one_token_sets_only_that_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("vec.txt");
        fs::write(&p, "DOG 1 2 3\nzebra 9 9 9\n").unwrap();
        let v = vocab();
        let base: EmbeddingTable<f32> = embed_init(&v, 3, None, &mut SgnRng::seed_from_u64(5)).unwrap();
        let t: EmbeddingTable<f32> = embed_init(&v, 3, Some(&p), &mut SgnRng::seed_from_u64(5)).unwrap();
        let dog = v.get("dog").unwrap();
        assert_eq!(t.weights.row(dog).to_vec(), vec![1.0, 2.0, 3.0]);
        for r in (0..v.len()).filter(|&r| r != dog) {
            assert_eq!(t.weights.row(r), base.weights.row(r));
        }
    }

    #[test]
    fn same_seed_same_table() {
        let a: EmbeddingTable<f32> = embed_init(&vocab(), 4, None, &mut SgnRng::seed_from_u64(8)).unwrap();
        let b: EmbeddingTable<f32> = embed_init(&vocab(), 4, None, &mut SgnRng::seed_from_u64(8)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn wrong_width_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("vec.txt");
        fs::write(&p, "dog 1 2\n").unwrap();
        assert!(embed_init::<f32>(&vocab(), 3, Some(&p), &mut SgnRng::seed_from_u64(0)).is_err());
    }
}
