//! Every example runs to completion.

mod life_table {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/life_table.rs"));
}

#[test]
fn life_table_example_runs() {
    life_table::run_example().expect("life_table example");
}

mod nonsmoking_e0 {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/nonsmoking_e0.rs"));
}

#[test]
fn nonsmoking_e0_example_runs() {
    nonsmoking_e0::run_example().expect("nonsmoking_e0 example");
}

mod mcmc_sampler {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/mcmc_sampler.rs"));
}

#[test]
fn mcmc_sampler_example_runs() {
    mcmc_sampler::run_example().expect("mcmc_sampler example");
}

mod assaf_model {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/assaf_model.rs"));
}

#[test]
fn assaf_model_example_runs() {
    assaf_model::run_example().expect("assaf_model example");
}

mod e0ns_forecast {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/e0ns_forecast.rs"));
}

#[test]
fn e0ns_forecast_example_runs() {
    e0ns_forecast::run_example().expect("e0ns_forecast example");
}

mod reconstruct_male {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/reconstruct_male.rs"));
}

#[test]
fn reconstruct_male_example_runs() {
    reconstruct_male::run_example().expect("reconstruct_male example");
}

mod gap_model {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/gap_model.rs"));
}

#[test]
fn gap_model_example_runs() {
    gap_model::run_example().expect("gap_model example");
}

mod synthetic_inputs {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/synthetic_inputs.rs"));
}

#[test]
fn synthetic_inputs_example_runs() {
    synthetic_inputs::run_example().expect("synthetic_inputs example");
}

mod input_validation {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/input_validation.rs"));
}

#[test]
fn input_validation_example_runs() {
    input_validation::run_example().expect("input_validation example");
}

mod desk_pipeline {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/desk_pipeline.rs"));
}

#[test]
fn desk_pipeline_example_runs() {
    desk_pipeline::run_example().expect("desk_pipeline example");
}

mod out_of_sample {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/out_of_sample.rs"));
}

#[test]
fn out_of_sample_example_runs() {
    out_of_sample::run_example().expect("out_of_sample example");
}
