use std::collections::BTreeMap;

use super::curve::DoubleLogisticParams;
use super::model::CountryState;
use super::AssafError;

/// Names of the six curve parameters, in storage order.
pub const CURVE_NAMES: [&str; 6] = ["rise_rate", "onset", "fall_rate", "duration", "peak", "shift"];

/// Scalar global parameters, in storage order after the age-effect hyperparameters.
pub const GLOBAL_NAMES: [&str; 12] = [
    "noise_scale",
    "var_cohort",
    "mu_rise_rate",
    "mu_onset",
    "var_onset",
    "mu_fall_rate",
    "mu_duration",
    "var_duration",
    "mu_peak",
    "var_peak",
    "mu_shift",
    "var_shift",
];

/// Column positions of one country's parameters in a draw row.
#[derive(Debug, Clone, PartialEq)]
pub struct CountryLayout {
    pub name: String,
    pub age_effect: [usize; 9],
    pub cohorts: Vec<(i32, usize)>,
    pub old_cohorts: Vec<(i32, usize)>,
    pub curve: [usize; 6],
    pub noise_var: usize,
}

impl CountryLayout {
    pub fn state(&self, row: &[f64]) -> CountryState {
        CountryState {
            age_effect: self.age_effect.map(|i| row[i]),
            cohort_effect: self.cohorts.iter().map(|&(_, i)| row[i]).collect(),
            cohort_effect_old: self.old_cohorts.iter().map(|&(_, i)| row[i]).collect(),
            curve: DoubleLogisticParams::from_array(&self.curve.map(|i| row[i])),
            noise_var: row[self.noise_var],
        }
    }

    pub fn cohort_years(&self) -> Vec<i32> {
        self.cohorts.iter().map(|c| c.0).collect()
    }

    pub fn old_cohort_years(&self) -> Vec<i32> {
        self.old_cohorts.iter().map(|c| c.0).collect()
    }
}

/// Column map of an ASSAF draw matrix, recovered from its parameter names.
#[derive(Debug, Clone, PartialEq)]
pub struct AssafLayout {
    pub countries: Vec<CountryLayout>,
    pub globals: BTreeMap<String, usize>,
}

// Splits `base[a][b]` into ("base", ["a", "b"]).
fn split_name(name: &str) -> (&str, Vec<&str>) {
    let base_end = name.find('[').unwrap_or(name.len());
    let args = name[base_end..]
        .split(']')
        .filter_map(|s| s.strip_prefix('['))
        .collect();
    (&name[..base_end], args)
}

#[derive(Default)]
struct Partial {
    age: BTreeMap<u32, usize>,
    cohorts: Vec<(i32, usize)>,
    old: Vec<(i32, usize)>,
    curve: [Option<usize>; 6],
    noise: Option<usize>,
}

fn entry<'a>(parts: &'a mut BTreeMap<String, Partial>, order: &mut Vec<String>, country: &str) -> &'a mut Partial {
    if !parts.contains_key(country) {
        order.push(country.to_string());
    }
    parts.entry(country.to_string()).or_default()
}

impl AssafLayout {
    pub fn from_names(names: &[String]) -> Result<Self, AssafError> {
        let bad = |n: &str| AssafError::Layout(format!("unexpected parameter `{n}`"));
        let mut order: Vec<String> = Vec::new();
        let mut parts: BTreeMap<String, Partial> = BTreeMap::new();
        let mut globals = BTreeMap::new();
        for (i, name) in names.iter().enumerate() {
            let (base, args) = split_name(name);
            match (base, args.len()) {
                ("age_effect", 2) => {
                    let age = args[1].parse().map_err(|_| bad(name))?;
                    entry(&mut parts, &mut order, args[0]).age.insert(age, i);
                }
                ("cohort_effect", 2) => {
                    let c = args[1].parse().map_err(|_| bad(name))?;
                    entry(&mut parts, &mut order, args[0]).cohorts.push((c, i));
                }
                ("cohort_effect_old", 2) => {
                    let c = args[1].parse().map_err(|_| bad(name))?;
                    entry(&mut parts, &mut order, args[0]).old.push((c, i));
                }
                ("noise_var", 1) => entry(&mut parts, &mut order, args[0]).noise = Some(i),
                (b, 1) if CURVE_NAMES.contains(&b) => {
                    let k = CURVE_NAMES.iter().position(|&c| c == b).expect("contained");
                    entry(&mut parts, &mut order, args[0]).curve[k] = Some(i);
                }
                (_, 0) | ("mu_age_effect" | "var_age_effect", 1) => {
                    globals.insert(name.clone(), i);
                }
                _ => return Err(bad(name)),
            }
        }
        let mut countries = Vec::new();
        for name in order {
            let p = parts.remove(&name).expect("ordered");
            let missing = || AssafError::Layout(format!("incomplete parameters for {name}"));
            if p.age.len() != 9 {
                return Err(missing());
            }
            let mut age_effect = [0; 9];
            for (slot, (_, i)) in age_effect.iter_mut().zip(&p.age) {
                *slot = *i;
            }
            let mut curve = [0; 6];
            for (slot, v) in curve.iter_mut().zip(p.curve) {
                *slot = v.ok_or_else(missing)?;
            }
            countries.push(CountryLayout {
                name: name.clone(),
                age_effect,
                cohorts: p.cohorts,
                old_cohorts: p.old,
                curve,
                noise_var: p.noise.ok_or_else(missing)?,
            });
        }
        if !globals.contains_key("var_cohort") {
            return Err(AssafError::Layout("missing var_cohort".into()));
        }
        Ok(AssafLayout { countries, globals })
    }

    pub fn country(&self, name: &str) -> Option<&CountryLayout> {
        self.countries.iter().find(|c| c.name == name)
    }

    pub fn global(&self, row: &[f64], name: &str) -> Option<f64> {
        self.globals.get(name).map(|&i| row[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_bracketed_names() {
        assert_eq!(split_name("cohort_effect[US][1913]"), ("cohort_effect", vec!["US", "1913"]));
        assert_eq!(split_name("var_cohort"), ("var_cohort", vec![]));
    }

    #[test]
    fn rejects_unknown_names() {
        let names = vec!["mystery[US][3][4]".to_string()];
        assert!(AssafLayout::from_names(&names).is_err());
    }
}
