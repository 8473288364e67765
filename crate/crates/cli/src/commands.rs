//! Implementations behind the CLI verbs. Every command that replaces or
//! creates output files stages the full payload first and renames it into
//! place, so a failed run leaves previous files untouched.

use std::fs;
use std::io::Write;
use std::path::Path;

use recipe_retrieval::{
    encode, evaluate, generate_synthetic_pairs, loss_trace_csv, query_topk, train, Embedding,
    EncoderParams, Error, EvalConfig, LabeledQuery, QueryResult, RecipeLibrary, RecipeRecord,
    Result, TrainConfig,
};

use crate::args::{AddArgs, BuildArgs, EvalArgs, QueryArgs, TrainArgs};
use crate::vectors;

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn save_library_atomic(lib: &RecipeLibrary, emb_path: &Path, rec_path: &Path) -> Result<()> {
    let mut matrix = Vec::new();
    lib.write_embedding_matrix(&mut matrix)?;
    let mut records = Vec::new();
    lib.write_recipe_dictionary(&mut records)?;
    write_atomic(emb_path, &matrix)?;
    write_atomic(rec_path, &records)?;
    Ok(())
}

fn save_params_atomic(params: &EncoderParams, path: &Path) -> Result<()> {
    let mut bytes = Vec::new();
    params.write_to(&mut bytes)?;
    write_atomic(path, &bytes)
}

pub fn cmd_build(args: &BuildArgs) -> Result<()> {
    let lib = if args.synthetic {
        let pairs = generate_synthetic_pairs(
            args.count,
            args.f_dim,
            args.d_dim,
            args.noise_sigma,
            args.seed,
        )?;
        if let Some(features_path) = &args.out_features {
            write_atomic(features_path, vectors::matrix_to_text(&pairs.features).as_bytes())?;
        }
        let entries = pairs
            .ids
            .iter()
            .zip(&pairs.targets)
            .enumerate()
            .map(|(i, (id, target))| {
                let record = RecipeRecord {
                    id: id.clone(),
                    title: format!("Synthetic recipe {i}"),
                    ingredients: vec![],
                    instructions: vec![],
                    source_url: None,
                };
                (record, target.clone())
            })
            .collect();
        RecipeLibrary::build(entries, args.d_dim)?
    } else {
        let (recipes, embeddings) = match (&args.recipes, &args.embeddings) {
            (Some(r), Some(e)) => (r, e),
            _ => {
                return Err(Error::InvalidConfig(
                    "either --synthetic or both --recipes and --embeddings are required".into(),
                ))
            }
        };
        RecipeLibrary::load(embeddings, recipes)?
    };
    save_library_atomic(&lib, &args.out_embeddings, &args.out_recipes)?;
    println!("built library: N={} D={}", lib.len(), lib.dim());
    Ok(())
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let lib = RecipeLibrary::load(&args.embeddings, &args.recipes)?;
    let features = vectors::read_matrix(&args.features)?;
    if features.rows() != lib.len() {
        return Err(Error::Format(format!(
            "{}: {} feature rows for a library of {} entries; rows pair with library rows by position",
            args.features.display(),
            features.rows(),
            lib.len()
        )));
    }
    let targets = recipe_retrieval::Matrix::from_embeddings(lib.embeddings(), lib.dim())?;
    let cfg = TrainConfig {
        margin: args.margin,
        learning_rate: args.learning_rate,
        epochs: args.epochs,
        batch_size: args.batch_size,
        seed: args.seed,
        negative_strategy: args.negative_strategy.into(),
    };
    let init = EncoderParams::init(features.cols(), lib.dim(), args.activation.into(), args.seed)?;
    let report = train(init, &features, &targets, &cfg)?;
    save_params_atomic(&report.params, &args.out_params)?;
    write_atomic(&args.out_trace, loss_trace_csv(&report.loss_trace).as_bytes())?;
    match report.loss_trace.last() {
        Some(loss) => println!("final loss: {loss:.6}"),
        None => println!("final loss: n/a (0 epochs)"),
    }
    Ok(())
}

fn query_embedding_from_args(
    embedding_vec: Option<&Path>,
    features_vec: Option<&Path>,
    params: Option<&Path>,
) -> Result<Embedding> {
    match (embedding_vec, features_vec) {
        (Some(path), None) => {
            let values = vectors::read_single_vector(path)?;
            Embedding::from_f64(&values)
        }
        (None, Some(path)) => {
            let params_path = params.ok_or_else(|| {
                Error::InvalidConfig("--features-vec needs --params to encode with".into())
            })?;
            let params = EncoderParams::load(params_path)?;
            let features = vectors::read_single_vector(path)?;
            encode(&params, &features)
        }
        _ => Err(Error::InvalidConfig(
            "provide exactly one of --embedding-vec or --features-vec".into(),
        )),
    }
}

fn query_result_rows(lib: &RecipeLibrary, result: &QueryResult) -> Result<Vec<(String, f64, String)>> {
    result
        .ranked
        .iter()
        .map(|(id, sim)| {
            let title = lib.get_recipe(id)?.title.clone();
            Ok((id.clone(), *sim, title))
        })
        .collect()
}

pub fn cmd_query(args: &QueryArgs) -> Result<()> {
    let lib = RecipeLibrary::load(&args.embeddings, &args.recipes)?;
    let query = query_embedding_from_args(
        args.embedding_vec.as_deref(),
        args.features_vec.as_deref(),
        args.params.as_deref(),
    )?;
    let result = query_topk(&lib, &query, args.k)?;
    let rows = query_result_rows(&lib, &result)?;
    if args.json {
        let results: Vec<serde_json::Value> = rows
            .iter()
            .enumerate()
            .map(|(i, (id, sim, title))| {
                serde_json::json!({
                    "rank": i + 1,
                    "id": id,
                    "similarity": sim,
                    "title": title,
                })
            })
            .collect();
        let payload = serde_json::json!({ "k": args.k, "results": results });
        println!("{}", serde_json::to_string_pretty(&payload).expect("json"));
    } else {
        let id_width = rows.iter().map(|(id, _, _)| id.len()).max().unwrap_or(2).max(2);
        println!("{:>4}  {:<id_width$}  {:>10}  title", "rank", "id", "similarity");
        for (i, (id, sim, title)) in rows.iter().enumerate() {
            println!("{:>4}  {:<id_width$}  {:>10.4}  {}", i + 1, id, sim, title);
        }
    }
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let lib = RecipeLibrary::load(&args.embeddings, &args.recipes)?;
    let true_ids = vectors::read_id_lines(&args.true_ids)?;
    let embeddings: Vec<Embedding> = match (&args.queries, &args.features) {
        (Some(path), None) => {
            let matrix = vectors::read_matrix(path)?;
            (0..matrix.rows())
                .map(|r| Embedding::from_f64(matrix.row(r)))
                .collect::<Result<_>>()?
        }
        (None, Some(path)) => {
            let params_path = args.params.as_ref().ok_or_else(|| {
                Error::InvalidConfig("--features needs --params to encode with".into())
            })?;
            let params = EncoderParams::load(params_path)?;
            let matrix = vectors::read_matrix(path)?;
            (0..matrix.rows())
                .map(|r| encode(&params, matrix.row(r)))
                .collect::<Result<_>>()?
        }
        _ => {
            return Err(Error::InvalidConfig(
                "provide exactly one of --queries or --features".into(),
            ))
        }
    };
    if embeddings.len() != true_ids.len() {
        return Err(Error::Format(format!(
            "{} queries but {} true ids; the files pair line by line",
            embeddings.len(),
            true_ids.len()
        )));
    }
    let queries: Vec<LabeledQuery> = embeddings
        .into_iter()
        .zip(true_ids)
        .map(|(embedding, true_id)| LabeledQuery { embedding, true_id })
        .collect();
    let cfg = EvalConfig {
        pool_size: args.pool_size,
        repetitions: args.repetitions,
        ks: args.ks.clone(),
        seed: args.seed,
    };
    let report = evaluate(&queries, &lib, &cfg)?;
    if args.json {
        println!("{}", report.to_json());
    } else {
        print!("{}", report.to_table());
    }
    if let Some(path) = &args.out_report {
        write_atomic(path, report.to_json().as_bytes())?;
    }
    Ok(())
}

pub fn cmd_add(args: &AddArgs) -> Result<()> {
    let mut lib = RecipeLibrary::load(&args.embeddings, &args.recipes)?;
    let text = fs::read_to_string(&args.recipe)?;
    let record: RecipeRecord = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", args.recipe.display())))?;
    let embedding = query_embedding_from_args(
        args.embedding_vec.as_deref(),
        args.features_vec.as_deref(),
        args.params.as_deref(),
    )?;
    let id = record.id.clone();
    lib.add_entry(record, embedding)?;
    save_library_atomic(&lib, &args.embeddings, &args.recipes)?;
    println!("added {id:?}: N={}", lib.len());
    Ok(())
}
