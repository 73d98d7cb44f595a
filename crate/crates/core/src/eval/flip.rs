use alloc::vec::Vec;

use crate::dataset::check_involution;
use crate::error::Result;
use crate::model::StackedModelParams;
use crate::tensor::Tensor;

/// `0.5 · (a + unflip(permute(b)))` where `b` is the prediction for the mirrored input.
pub fn flip_average(a: &Tensor<f32>, b: &Tensor<f32>, flip_perm: &[usize]) -> Result<Tensor<f32>> {
    check_involution(flip_perm)?;
    let back = b.flip_horizontal().permute_channels(flip_perm)?;
    if back.shape() != a.shape() {
        return Err(crate::error::Error::ShapeMismatch {
            op: "flip_average",
            expected: a.shape().to_vec(),
            actual: back.shape().to_vec(),
        });
    }
    let data = a
        .data()
        .iter()
        .zip(back.data())
        .map(|(&x, &y)| 0.5 * (x + y))
        .collect();
    Tensor::new(a.shape().to_vec(), data)
}

/// Flip-averaged heatmaps of every stack.
pub fn predict_stacks_with_flip(
    model: &StackedModelParams<f32>,
    images: &Tensor<f32>,
    flip_perm: &[usize],
) -> Result<Vec<Tensor<f32>>> {
    check_involution(flip_perm)?;
    let plain = model.predict(images)?;
    let mirrored = model.predict(&images.flip_horizontal())?;
    plain
        .iter()
        .zip(&mirrored)
        .map(|(a, b)| flip_average(a, b, flip_perm))
        .collect()
}

/// Flip-averaged heatmaps of the final stack.
pub fn predict_with_flip(
    model: &StackedModelParams<f32>,
    images: &Tensor<f32>,
    flip_perm: &[usize],
) -> Result<Tensor<f32>> {
    let mut stacks = predict_stacks_with_flip(model, images, flip_perm)?;
    Ok(stacks.pop().expect("model has at least one stack"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_channels_are_fixed_points() {
        let a = Tensor::from_fn([1, 2, 3, 3], |i| if i < 9 { 0.25 } else { 0.75 });
        let b = a.permute_channels(&[1, 0]).unwrap();
        let avg = flip_average(&a, &b, &[1, 0]).unwrap();
        assert_eq!(avg, a);
    }

    #[test]
    fn rejects_non_involution() {
        let a = Tensor::<f32>::zeros([1, 3, 2, 2]);
        assert!(flip_average(&a, &a, &[1, 2, 0]).is_err());
        assert!(flip_average(&a, &a, &[0, 2, 1]).is_ok());
    }
}
