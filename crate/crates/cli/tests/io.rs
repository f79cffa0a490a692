use eldp::mechanisms::CountVector;
use eldp::optim::{LabeledPoint, LearningUser};
use eldp::partition::ElementPartition;
use eldp_cli::io::{
    parse_counts, parse_pairs, parse_partition, read_vector, write_counts, write_pairs, write_partition, write_vector,
    CountsTable,
};
use eldp_cli::CliError;

fn items(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn message<T: std::fmt::Debug>(r: Result<T, CliError>) -> String {
    match r {
        Err(CliError::Config(msg)) => msg,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn counts_round_trip() {
    let table = CountsTable {
        items: items(&["the", "cat", "sat"]),
        users: vec![CountVector::new(vec![2, 0, 1]).unwrap(), CountVector::new(vec![0, 7, 0]).unwrap()],
    };
    let mut buf = Vec::new();
    write_counts(&mut buf, &table).unwrap();
    assert_eq!(String::from_utf8(buf.clone()).unwrap(), "the,cat,sat\n2,0,1\n0,7,0\n");
    assert_eq!(parse_counts(buf.as_slice(), "x").unwrap(), table);
}

#[test]
fn malformed_counts_name_the_line() {
    assert!(message(parse_counts("a,b\n1,2\n1,x\n".as_bytes(), "c.csv")).starts_with("c.csv:3: column 'b'"));
    assert!(message(parse_counts("a,b\n0,0\n".as_bytes(), "c.csv")).starts_with("c.csv:2:"));
    assert!(message(parse_counts("a,a\n1,2\n".as_bytes(), "c.csv")).contains("columns 1 and 2"));
    assert!(message(parse_counts("a,b\n".as_bytes(), "c.csv")).contains("no users"));
    assert!(parse_counts("a,b\n1,2,3\n".as_bytes(), "c.csv").is_err());
}

#[test]
fn partition_round_trip_and_ordering() {
    let names = items(&["x", "y", "z"]);
    let part = parse_partition("# comment\nz\t1\n\nx\t2\ny\t1\n".as_bytes(), &names, "p").unwrap();
    assert_eq!(part.assignment(), &[1, 0, 0]);
    assert_eq!(part.num_clusters(), 2);
    let mut buf = Vec::new();
    write_partition(&mut buf, &names, &part).unwrap();
    assert_eq!(String::from_utf8(buf.clone()).unwrap(), "x\t2\ny\t1\nz\t1\n");
    assert_eq!(parse_partition(buf.as_slice(), &names, "p").unwrap(), part);
}

#[test]
fn partition_errors_carry_context() {
    let names = items(&["x", "y"]);
    let cases = [
        ("x\t1\nx\t2\ny\t1\n", "p.tsv:2: item 'x' listed twice"),
        ("x\t1\nw\t1\ny\t1\n", "p.tsv:2: item 'w' is not a column"),
        ("x\t1\n", "p.tsv: item 'y' has no cluster"),
        ("x\t0\ny\t1\n", "p.tsv:1: cluster index must be a positive integer"),
        ("x 1\ny\t1\n", "p.tsv:1: expected"),
    ];
    for (text, want) in cases {
        let msg = message(parse_partition(text.as_bytes(), &names, "p.tsv"));
        assert!(msg.starts_with(want), "{msg}");
    }
    // an unused index leaves an empty cluster
    let gap = parse_partition("x\t1\ny\t3\n".as_bytes(), &names, "p.tsv").unwrap();
    assert_eq!((gap.num_clusters(), gap.cluster_sizes()), (3, vec![1, 0, 1]));
}

#[test]
fn pairs_round_trip() {
    let users = vec![
        LearningUser::new(vec![
            LabeledPoint { item: 0, features: vec![0.5, -1.25], label: 1.0 },
            LabeledPoint { item: 2, features: vec![0.0, 3.0], label: -1.0 },
        ]),
        LearningUser::new(vec![LabeledPoint { item: 1, features: vec![1e-3, 2.0], label: -1.0 }]),
    ];
    let mut buf = Vec::new();
    write_pairs(&mut buf, &users).unwrap();
    let back = parse_pairs(buf.as_slice(), "pairs").unwrap();
    assert_eq!(back.len(), 2);
    for (a, b) in users.iter().zip(&back) {
        assert_eq!(a.points, b.points);
    }
    assert!(message(parse_pairs("user,item,label,x1\n0,0,2,1.0\n".as_bytes(), "f")).contains("label"));
    assert!(message(parse_pairs("u,item,label,x1\n".as_bytes(), "f")).contains("header"));
}

#[test]
fn vector_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.csv");
    let v = vec![0.1, -2.5, 1e-17];
    write_vector(std::fs::File::create(&path).unwrap(), &v).unwrap();
    assert_eq!(read_vector(&path).unwrap(), v);
    let err = read_vector(&dir.path().join("none.csv")).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("none.csv"));
}

#[test]
fn singletons_written_as_partition_files() {
    let names = items(&["a", "b", "c"]);
    let mut buf = Vec::new();
    write_partition(&mut buf, &names, &ElementPartition::singletons(3)).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "a\t1\nb\t2\nc\t3\n");
}
