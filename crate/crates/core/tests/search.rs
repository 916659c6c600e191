use gradmatch::bench::{gen_offline_dataset, InputDistribution, Oracle};
use gradmatch::search::{ascend, ascend_oracle, ascend_surrogate, batch_search};
use gradmatch::seed::rng;
use gradmatch::{
    Activation, ArchitectureSpec, Objective, ParamLayout, ParamVector, SearchConfig, SurrogateModel, TrainConfig,
};
use rand::Rng;

#[test]
fn plain_steps_follow_recurrence() {
    let q = Oracle::quadratic2d();
    let cfg = SearchConfig::plain(25, 0.07);
    let trace = ascend_oracle(&q, &[0.9, 0.8], &cfg).unwrap();
    let mut x = vec![0.9, 0.8];
    for (k, it) in trace.iterates.iter().enumerate() {
        for (a, b) in it.iter().zip(&x) {
            assert!((a - b).abs() <= 1e-12, "step {k}");
        }
        assert_eq!(trace.values[k], q.value(it));
        let g = q.gradient(&x);
        for (xi, gi) in x.iter_mut().zip(g) {
            *xi += 0.07 * gi;
        }
    }
    assert_eq!(trace.iterates.len(), 26);
}

#[test]
fn concave_quadratic_reaches_maximizer() {
    let center = vec![0.25, -0.5];
    let q = Oracle::quadratic("q", vec![1.0, 2.0], center.clone(), vec![(-1.0, 1.0); 2]).unwrap();
    // μ = 2, so λ = 0.3 < 1/μ.
    let trace = ascend(&q, &[-1.0, 1.0], &SearchConfig::plain(500, 0.3)).unwrap();
    for (a, b) in trace.last().iter().zip(&center) {
        assert!((a - b).abs() <= 1e-6);
    }
}

#[test]
fn one_dimensional_example() {
    let q = Oracle::quadratic("neg-square", vec![2.0], vec![0.0], vec![(-2.0, 2.0)]).unwrap();
    let trace = ascend(&q, &[1.0], &SearchConfig::plain(2, 0.25)).unwrap();
    assert_eq!(trace.iterates, vec![vec![1.0], vec![0.5], vec![0.25]]);
}

fn linear_model(slope: &[f64], bias: f64) -> SurrogateModel {
    let arch = ArchitectureSpec::linear(slope.len());
    let mut v = slope.to_vec();
    v.push(bias);
    let params = ParamVector::new(ParamLayout::new(slope.len(), &[], Activation::Identity).unwrap(), v).unwrap();
    SurrogateModel::from_params(arch, params, 0).unwrap()
}

#[test]
fn surrogate_equal_to_oracle_gives_identical_trace() {
    let slope = [1.0, -2.0, 0.5, 3.0];
    let oracle = Oracle::linear4();
    let model = linear_model(&slope, 0.0);
    for cfg in [SearchConfig::plain(40, 0.01), SearchConfig::default()] {
        let a = ascend_oracle(&oracle, &[0.1, 0.2, 0.3, 0.4], &cfg).unwrap();
        let b = ascend_surrogate(&model, &[0.1, 0.2, 0.3, 0.4], &cfg).unwrap();
        assert_eq!(a.iterates, b.iterates);
    }
}

#[test]
fn batch_is_order_preserving_and_independent() {
    let q = Oracle::quadratic2d();
    let mut r = rng(8);
    let starts: Vec<Vec<f64>> = (0..17).map(|_| vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)]).collect();
    let cfg = SearchConfig::default();
    let all = batch_search(&q, &starts, &cfg).unwrap();
    for (s, t) in starts.iter().zip(&all) {
        assert_eq!(t.as_ref().unwrap(), &ascend(&q, s, &cfg).unwrap());
    }
    let mut rev = starts.clone();
    rev.reverse();
    let back = batch_search(&q, &rev, &cfg).unwrap();
    for (a, b) in all.iter().zip(back.iter().rev()) {
        assert_eq!(a.as_ref().unwrap(), b.as_ref().unwrap());
    }
}

#[test]
fn many_starts_on_trained_surrogate_stay_finite() {
    let ds = gen_offline_dataset(&Oracle::shekel(), 300, InputDistribution::default(), 2).unwrap();
    let arch = ArchitectureSpec {
        input_dim: 4,
        hidden_layers: vec![16, 8],
        activation: Activation::LeakyRelu,
    };
    let cfg = TrainConfig {
        epochs: 2,
        path_count: 32,
        batch_size: 16,
        ..TrainConfig::default()
    };
    let (model, _) = gradmatch::training::train(&ds, &arch, &cfg).unwrap();
    let starts: Vec<Vec<f64>> = ds.top_k(128).into_iter().map(|i| ds.input(i).to_vec()).collect();
    let traces = batch_search(&model, &starts, &SearchConfig::default()).unwrap();
    assert_eq!(traces.len(), 128);
    for t in traces {
        let t = t.unwrap();
        assert_eq!(t.iterates.len(), 151);
        assert!(t.iterates.iter().flatten().all(|v| v.is_finite()));
    }
}
