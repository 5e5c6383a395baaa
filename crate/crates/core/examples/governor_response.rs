//! Open-loop TGOV1 response to a held speed deviation: the valve follows
//! the droop command through `t1`, the reheater lead-lag delivers `t2/t3` of
//! a valve move at once and the rest over `t3`.
//!
//! ```text
//! cargo run --example governor_response
//! ```

use gridfreq::governor::{
    tgov1_init, tgov1_steady_state, tgov1_step_output, GovernorState, Tgov1Params,
};
use gridfreq::simulator::rk4::Rk4;

fn main() {
    let params = Tgov1Params::default();
    let p0 = 0.8;
    let dw = -0.002;
    let init = tgov1_init(&params, p0).unwrap();

    println!(
        "r {} t1 {} s t2 {} s t3 {} s, high-pressure fraction {:.3}",
        params.r,
        params.t1_s,
        params.t2_s,
        params.t3_s,
        params.hp_fraction()
    );
    println!("speed deviation {dw} pu held from t = 0\n");
    println!("  t (s)   valve    Pm");

    let mut y = [init.v, init.x_ll];
    let mut rk = Rk4::new(2);
    let h = 0.01;
    let f = |_t: f64, y: &[f64], dy: &mut [f64]| {
        let o = tgov1_step_output(
            &GovernorState {
                v: y[0],
                x_ll: y[1],
            },
            &params,
            p0,
            dw,
        );
        dy[0] = o.dv_dt;
        dy[1] = o.dx_ll_dt;
    };
    for k in 0..=4000 {
        let t = k as f64 * h;
        if k % 250 == 0 {
            let pm = tgov1_step_output(
                &GovernorState {
                    v: y[0],
                    x_ll: y[1],
                },
                &params,
                p0,
                dw,
            )
            .p_mech;
            println!("{t:7.2}  {:.5}  {pm:.5}", y[0]);
        }
        rk.step(t, &mut y, h, f);
        y[0] = y[0].clamp(params.v_min, params.v_max);
    }
    println!(
        "\nsteady state {:.5} pu",
        tgov1_steady_state(&params, p0, dw)
    );
}
