use rand::Rng;

use super::{DonorKind, FittedImputer, MethodConfig, MethodSpec, Model, ScoreMode, WeightMode};
use crate::classical::{
    build_score_classes, fit_additive_splines, fit_knn, fit_pcr, fit_weighted_linear, fit_weighted_logistic,
};
use crate::data::{RespondentData, Rows};
use crate::error::{Error, Result};
use crate::svr::fit_svr;
use crate::trees::{fit_bart, fit_cart, fit_cubist, fit_ls_boost, fit_random_forest, fit_xgb};

/// Extra information some methods need beyond the respondents.
#[derive(Debug, Clone, Copy, Default)]
pub struct FitContext<'a> {
    /// Predictors of every sampled unit; the score method forms its classes
    /// on these. Defaults to the respondents' rows.
    pub all_rows: Option<&'a Rows>,
}

/// Fit the configured method on the respondents.
pub fn fit<R: Rng + ?Sized>(
    config: &MethodConfig,
    data: &RespondentData,
    ctx: FitContext<'_>,
    rng: &mut R,
) -> Result<FittedImputer> {
    if data.is_empty() {
        return Err(Error::Empty("respondents"));
    }
    let unit;
    let data = match config.weight_mode {
        WeightMode::Design => data,
        WeightMode::Unit => {
            unit = RespondentData::new(data.x.clone(), data.y.clone(), vec![1.0; data.len()])?;
            &unit
        }
    };
    let mut donor = DonorKind::None;
    let model: Box<dyn Model> = match &config.spec {
        MethodSpec::Linear => Box::new(fit_weighted_linear(data)?),
        MethodSpec::Logistic { max_iter, tol, coef_cap } => {
            Box::new(fit_weighted_logistic(data, *max_iter, *tol, *coef_cap)?)
        }
        MethodSpec::Score { class_size, mode } => {
            let lin = fit_weighted_linear(data)?;
            let rows = ctx.all_rows.unwrap_or(&data.x);
            if rows.n_cols() != data.n_features() {
                return Err(Error::incompatible(&config.name, "sample rows and respondent rows differ in width"));
            }
            if *mode == ScoreMode::HotDeck {
                donor = DonorKind::HotDeck;
            }
            Box::new(build_score_classes(rows, data, lin, *class_size)?)
        }
        MethodSpec::Knn { k } => {
            if *k == 1 {
                donor = DonorKind::Nearest;
            }
            Box::new(fit_knn(data, (*k).min(data.len()))?)
        }
        MethodSpec::Additive { knots } => Box::new(fit_additive_splines(data, *knots)?),
        MethodSpec::Pcr { components } => Box::new(fit_pcr(data, *components)?),
        MethodSpec::Cart(c) => Box::new(fit_cart(data, c)?),
        MethodSpec::Forest(c) => Box::new(fit_random_forest(data, c, rng)?),
        MethodSpec::LsBoost(c) => Box::new(fit_ls_boost(data, c)?),
        MethodSpec::Xgb(c) => Box::new(fit_xgb(data, c)?),
        MethodSpec::Bart(c) => Box::new(fit_bart(data, c, rng)?),
        MethodSpec::Cubist(c) => Box::new(fit_cubist(data, c)?),
        MethodSpec::Svr(c) => Box::new(fit_svr(data, c)?),
    };
    Ok(FittedImputer::new(config.name.clone(), model, donor, data.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imputer::{method_names, preset, Scale};
    use crate::rng::seeded;

    fn data(n: usize) -> RespondentData {
        let mut rng = seeded(9);
        let x = Rows::new((0..n * 3).map(|_| rng.random::<f64>()).collect(), 3).unwrap();
        let y = x.iter().map(|r| 1.0 + r[0] + (3.0 * r[1]).sin() + 0.1 * rng.random::<f64>()).collect();
        let w = (0..n).map(|_| 1.0 + rng.random::<f64>()).collect();
        RespondentData::new(x, y, w).unwrap()
    }

    #[test]
    fn every_preset_fits_and_predicts_finite() {
        let d = data(520);
        for name in method_names() {
            let mut cfg = preset(name, Scale::Desk).unwrap();
            if let MethodSpec::Bart(b) = &mut cfg.spec {
                b.burn_in = 20;
                b.n_draws = 20;
            }
            if name == "LOGISTIC" {
                continue;
            }
            let f = fit(&cfg, &d, FitContext::default(), &mut seeded(1)).unwrap_or_else(|e| panic!("{name}: {e}"));
            let v = f.predict(&[0.5, 0.5, 0.5]).unwrap();
            assert!(v.is_finite(), "{name}");
            assert!(f.predict(&[0.5]).is_err());
        }
    }

    #[test]
    fn single_respondent_nn_is_constant() {
        let d = RespondentData::unweighted(Rows::from_rows(&[[1.0, 2.0, 3.0]]).unwrap(), vec![4.5]).unwrap();
        let f = fit(&preset("1NN", Scale::Desk).unwrap(), &d, FitContext::default(), &mut seeded(0)).unwrap();
        assert_eq!(f.predict(&[9.0, 9.0, 9.0]).unwrap(), 4.5);
        assert_eq!(f.donor, DonorKind::Nearest);
    }

    #[test]
    fn unit_weight_mode_ignores_design_weights() {
        let d = data(60);
        let mut cfg = preset("LR", Scale::Desk).unwrap();
        cfg.weight_mode = WeightMode::Unit;
        let a = fit(&cfg, &d, FitContext::default(), &mut seeded(0)).unwrap();
        let u = RespondentData::unweighted(d.x.clone(), d.y.clone()).unwrap();
        let b = fit(&preset("LR", Scale::Desk).unwrap(), &u, FitContext::default(), &mut seeded(0)).unwrap();
        assert_eq!(a.predict(&[0.1, 0.2, 0.3]).unwrap(), b.predict(&[0.1, 0.2, 0.3]).unwrap());
    }
}
