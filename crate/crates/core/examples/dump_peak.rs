// scratch: dump waveform around a steady strike
use gaitvib_core::floorsim::FloorModel;
use gaitvib_core::gaitsynth::{synth_trial, GaitType};

fn main() {
    let floor = FloorModel { noise_std: 0.0, ..FloorModel::default() };
    let trial = synth_trial(GaitType::Normal, 0, 42, 0, 43, &floor).unwrap();
    println!("L strikes {:?}", trial.events.left.strikes);
    println!("R strikes {:?}", trial.events.right.strikes);
    println!("L foot positions {:?}", trial.footfalls_left);
    println!("R foot positions {:?}", trial.footfalls_right);
    let rate = trial.vibration.sample_rate;
    let strike = trial.events.left.strikes[1];
    let s = &trial.vibration.signals[1];
    let w0 = ((strike - 0.02) * rate) as usize;
    for k in 0..50 {
        let i = w0 + k;
        let t = i as f64 / rate;
        let gl = trial.grf_left.vertical[i];
        let gr = trial.grf_right.vertical[i];
        println!("t={:.3} F_l={:8.1} F_r={:8.1} v={:9.4}", t, gl, gr, s[i]);
    }
}
