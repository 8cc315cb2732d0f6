use gig_core::data::{
    gen_batch_median_task, gen_clip_direction_task, gen_sum_regression_task, load_checkpoint, load_dataset, save_checkpoint,
    save_dataset, split_samples, train_on_dataset, Config, Split,
};
use gig_core::training::evaluate;

fn small(updater: &str, schedule: &str) -> Config {
    Config {
        hidden_dim: 6,
        num_hidden_layers: 1,
        epochs: 3,
        updater: updater.into(),
        schedule: schedule.into(),
        ..Config::default()
    }
}

#[test]
fn every_updater_and_schedule_trains_on_every_task() {
    let tasks = [
        gen_batch_median_task(4, 3, 1).unwrap(),
        gen_clip_direction_task(4, 4, 1).unwrap(),
        gen_sum_regression_task(8, 1).unwrap(),
    ];
    for data in &tasks {
        for updater in ["gcn", "gatedgcn"] {
            for schedule in ["constant", "cosine_annealing"] {
                let run = train_on_dataset(&small(updater, schedule), data).unwrap();
                assert_eq!(run.history.epochs.len(), 3);
                for (_, e) in &run.evaluations {
                    assert!(e.loss.is_finite(), "{updater}/{schedule}");
                }
            }
        }
    }
}

#[test]
fn unknown_registry_names_are_errors() {
    let data = gen_sum_regression_task(4, 1).unwrap();
    assert!(train_on_dataset(&small("gat", "constant"), &data).is_err());
    assert!(train_on_dataset(&small("gcn", "step"), &data).is_err());
}

#[test]
fn a_checkpoint_reloaded_from_disk_evaluates_identically() {
    let dir = tempfile::tempdir().unwrap();
    save_dataset(dir.path(), &gen_clip_direction_task(6, 4, 2).unwrap()).unwrap();
    let data = load_dataset(dir.path()).unwrap();
    let run = train_on_dataset(&small("gatedgcn", "cosine_annealing"), &data).unwrap();
    let path = dir.path().join("ck.json");
    save_checkpoint(&path, &run.params, &run.config, run.dims).unwrap();

    let ck = load_checkpoint(&path).unwrap();
    let readout = ck.config.readout.unwrap();
    let set = split_samples(&ck.config, &data.meta, &data.test, readout, Split::Test).unwrap();
    let e = evaluate(&ck.network().unwrap(), &ck.params, &set, run.loss).unwrap();
    assert_eq!(&e, run.evaluation(Split::Test).unwrap());
}
