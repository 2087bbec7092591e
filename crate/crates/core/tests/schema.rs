use serde_json::Value;
use spde_lab::harness::parse_config;

fn schema() -> Value {
    let text = include_str!("../schema/experiment-config.schema.json");
    serde_json::from_str(text).unwrap()
}

fn property_names(node: &Value) -> Vec<String> {
    let mut names: Vec<String> = node["properties"].as_object().unwrap().keys().cloned().collect();
    names.sort();
    names
}

#[test]
fn schema_lists_every_resolved_field() {
    let s = schema();
    let config = parse_config(
        r#"{"experiment":"simulate","model":{"family":"laplacian_dirichlet","n":3},
            "params":{"initial":[1,0,0],"eta":[1,0,0],"rho":{"law":"dirac","point":[1,0,0]},
            "rho_tilde":{"law":"dirac","point":[0,0,0]},"integrand_map":[[1],[0],[0]],"integrand_decay":0,
            "epsilons":[1],"r_max":2,"laplace_lambda":1,"quadrature_steps":10,"burn_in":1,"gap":0.1}}"#,
    )
    .unwrap()
    .resolve()
    .unwrap();
    let echoed = serde_json::to_value(&config).unwrap();
    let top = property_names(&s);
    for (key, value) in echoed.as_object().unwrap() {
        assert!(top.contains(key), "schema lacks top-level {key}");
        if let (Some(fields), Some(node)) = (value.as_object(), s["properties"][key].get("properties")) {
            let known: Vec<&String> = node.as_object().unwrap().keys().collect();
            for field in fields.keys() {
                assert!(known.contains(&field), "schema lacks {key}.{field}");
            }
        }
    }
    let params = echoed["params"].as_object().unwrap();
    assert_eq!(params.len(), property_names(&s["properties"]["params"]).len());
}

#[test]
fn schema_enumerates_experiments() {
    let s = schema();
    let names: Vec<&str> =
        s["properties"]["experiment"]["enum"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    for name in &names {
        let text = format!(r#"{{"experiment":"{name}","model":{{"family":"laplacian_dirichlet","n":2}}}}"#);
        assert!(parse_config(&text).is_ok(), "{name}");
    }
    assert!(parse_config(r#"{"experiment":"other","model":{"family":"laplacian_dirichlet","n":2}}"#).is_err());
}
