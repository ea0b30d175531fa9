//! The reversed dialogue graph: topology, one-hot node features and how a
//! few dialogue events change them.

use kgfraud::dialogue::{build_graph, DialogueEvent};
use kgfraud::kg::{generate_world, personal_kg, sample_profiles, Item, WorldGenConfig};

fn main() -> anyhow::Result<()> {
    let world = generate_world(&WorldGenConfig::default(), 7)?;
    let profile = sample_profiles(&world, 1, 3)?.remove(0);
    let mut g = build_graph(&personal_kg(&world, &profile))?;
    let topo = g.topology().clone();
    println!("{} nodes, {} edges, {} askable pairs", topo.n_nodes(), topo.edges.len(), topo.n_askable());
    for item in Item::ALL {
        println!("  {:<10} {} candidate answers", item.name(), topo.worker_answers[item.index()].len());
    }

    let answer = topo.worker_answers[Item::School.index()][0];
    let before = g.encode_all();
    g.record_event(DialogueEvent::WorkerSelected { item: Item::School })?;
    g.record_event(DialogueEvent::QuestionAsked { item: Item::School, answer })?;
    g.record_event(DialogueEvent::AnswerReceived { answer, correct: false })?;
    let after = g.encode_all();
    let changed: Vec<usize> = (0..topo.n_nodes()).filter(|&v| before.dense(v) != after.dense(v)).collect();
    println!("after one wrong answer on School: nodes {changed:?} changed, status {:?}", g.answer_status(answer));
    println!("school counts (correct, wrong) = {:?}", g.answer_counts(Item::School));

    let dump = g.dump(Some(&world));
    println!("{}", serde_json::to_string(&dump.nodes[dump.personal[Item::School.index()]])?);
    Ok(())
}
