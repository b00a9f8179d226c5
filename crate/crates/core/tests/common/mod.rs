use std::path::Path;

/// A Burgers experiment small enough to run in a second or two.
pub fn tiny_burgers_toml(output: &Path, r_max: usize, methods: &str) -> String {
    let r_list: Vec<String> = (1..=r_max).map(|r| r.to_string()).collect();
    format!(
        r#"problem = "burgers"
mu = 0.1
dt = 1e-3
T = 0.2
stride = 1
scheme = "semi-implicit-euler"
r_max = {r_max}
r_list = [{r_list}]
method_list = [{methods}]
ridge = 0.0
derivative_mode = "exact-rhs"
output_dir = "{out}"

[grid]
n = 64
L = 1.0

[training_ics]
amplitude = [0.9, 1.1]
frequency = [1, 2]
phase = [0.0]

[[test_ics]]
name = "test1"
count = 2
seed = 7
region = "inside"
params.amplitude = {{ intervals = [[0.9, 1.1]] }}
params.frequency = {{ choices = [1, 2] }}
params.phase = {{ choices = [0.0] }}
"#,
        r_list = r_list.join(", "),
        out = output.display()
    )
}
