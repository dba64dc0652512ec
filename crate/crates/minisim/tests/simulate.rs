// SPDX-License-Identifier: Apache-2.0

use minisim::{compile_sources, simulate};

fn run(src: &str) -> (String, String, i32) {
    let design = compile_sources(&[("t.v".to_string(), src.to_string())], None)
        .unwrap_or_else(|e| panic!("compile failed: {e}"));
    let mut out = Vec::new();
    let mut err = Vec::new();
    let s = simulate(&design, &mut out, &mut err).expect("simulation error");
    (
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
        s.exit_code,
    )
}

fn stdout(src: &str) -> String {
    run(src).0
}

fn compile_err(src: &str) -> String {
    compile_sources(&[("t.v".to_string(), src.to_string())], None)
        .map(|_| ())
        .expect_err("expected a compile error")
        .to_string()
}

const ADDER: &str = include_str!("fixtures/adder.v");
const ADDER_TB: &str = include_str!("fixtures/adder_tb.v");

fn run_pair(dut: &str) -> Result<String, String> {
    let srcs = vec![
        ("adder.v".to_string(), dut.to_string()),
        ("adder_tb.v".to_string(), ADDER_TB.to_string()),
    ];
    let d = compile_sources(&srcs, None).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    simulate(&d, &mut out, &mut std::io::sink()).unwrap();
    Ok(String::from_utf8(out).unwrap())
}

#[test]
fn adder_correct_passes() {
    let out = run_pair(ADDER).unwrap();
    assert_eq!(out, "TBFORGE_PASS\n");
}

#[test]
fn adder_wrong_logic_fails() {
    let out = run_pair(&ADDER.replace("a + b + cin", "a - b")).unwrap();
    assert!(out.contains("TBFORGE_FAIL"), "{out}");
    assert!(!out.contains("TBFORGE_PASS"));
}

#[test]
fn adder_syntax_error_reports_line() {
    let bad = ADDER.replace("a + b + cin;", "a + b + cin");
    let err = run_pair(&bad).unwrap_err();
    assert!(err.starts_with("adder.v:"), "{err}");
    assert!(err.contains("syntax error"), "{err}");
}

#[test]
fn display_formats() {
    let out = stdout(
        r#"module t;
  reg [7:0] a; reg signed [7:0] n; integer i;
  initial begin
    a = 8'd5; n = -8'sd3; i = 42;
    $display("%d|%0d|%b|%h|%o|%3d|%-3d|", a, a, a, a, a, a, a);
    $display("%0d %d", n, n);
    $display("%0d %s %c %%", i, "hi", 8'h41);
    $display("%m");
    $display(i);
    a = 8'bx1x0_0000;
    $display("%b %h %d", a, a, a);
  end
endmodule"#,
    );
    assert_eq!(
        out,
        "  5|5|00000101|05|005|  5|5  |\n-3   -3\n42 hi A %\nt\n         42\nx1x00000 X0   X\n"
    );
}

#[test]
fn context_width_keeps_carry() {
    let out = stdout(
        r#"module t;
  reg [3:0] a, b; reg [4:0] s; reg [3:0] s4;
  initial begin
    a = 4'hf; b = 4'h1;
    s = a + b; s4 = a + b;
    $display("%0d %0d %0d", s, s4, (a + b) >> 1);
    s = (a + b) >> 1;
    $display("%0d %0d", s, a + b > 4'hf);
  end
endmodule"#,
    );
    // operands of $display are self-determined; assignment context widens
    assert_eq!(out, "16 0 0\n8 0\n");
}

#[test]
fn signed_arithmetic() {
    let out = stdout(
        r#"module t;
  reg signed [7:0] a; reg [7:0] u;
  initial begin
    a = -8'sd8; u = 8'd8;
    $display("%0d %0d %0d", a >>> 1, a / 3, $signed(u) < 0);
    $display("%0d", a < 0);
    $display("%0d", $unsigned(a));
  end
endmodule"#,
    );
    assert_eq!(out, "-4 -2 0\n1\n248\n");
}

#[test]
fn nonblocking_swap_and_clock() {
    let out = stdout(
        r#"module t;
  reg clk = 0; reg [3:0] a = 1, b = 2;
  always #5 clk = ~clk;
  always @(posedge clk) begin a <= b; b <= a; end
  initial begin
    @(posedge clk); #1 $display("%0d %0d %0t", a, b, $time);
    @(posedge clk); #1 $display("%0d %0d %0t", a, b, $time);
    $finish;
  end
endmodule"#,
    );
    assert_eq!(out, "2 1 6\n1 2 16\n");
}

#[test]
fn counter_module_with_reset() {
    let out = stdout(
        r#"module counter #(parameter W = 4) (input clk, input rst, output reg [W-1:0] q);
  always @(posedge clk or posedge rst)
    if (rst) q <= 0; else q <= q + 1'b1;
endmodule
module t;
  reg clk, rst; wire [2:0] q;
  counter #(.W(3)) c(clk, rst, q);
  initial begin
    clk = 0; rst = 1; #1 rst = 0;
    repeat (10) begin #1 clk = 1; #1 clk = 0; end
    $display("q=%0d w=%0d", q, $bits(q));
    $finish;
  end
endmodule"#,
    );
    assert_eq!(out, "q=2 w=3\n");
}

#[test]
fn comb_always_case_and_functions() {
    let out = stdout(
        r#"module mux(input [1:0] sel, input [7:0] a, b, c, d, output reg [7:0] y);
  always @* begin
    case (sel)
      2'd0: y = a;
      2'd1: y = b;
      2'd2, 2'd3: y = sel[0] ? d : c;
      default: y = 8'hxx;
    endcase
  end
endmodule
module t;
  reg [1:0] sel; wire [7:0] y;
  function [7:0] twice; input [7:0] v; begin twice = v << 1; end endfunction
  mux m(.sel(sel), .a(8'd1), .b(8'd2), .c(8'd3), .d(twice(8'd2)), .y(y));
  integer k;
  initial begin
    for (k = 0; k < 4; k = k + 1) begin sel = k; #1 $write("%0d ", y); end
    $display("");
  end
endmodule"#,
    );
    assert_eq!(out, "1 2 3 4 \n");
}

#[test]
fn casez_and_memories_and_tasks() {
    let out = stdout(
        r#"module t;
  reg [7:0] mem [0:3];
  reg [3:0] x; reg [1:0] enc; integer i;
  task store; input [1:0] addr; input [7:0] v; begin mem[addr] = v; #1; end endtask
  initial begin
    for (i = 0; i < 4; i = i + 1) store(i, i * 3);
    $display("%0d %0d %0d", mem[1], mem[3], mem[2][2:1]);
    x = 4'b0100;
    casez (x)
      4'b1???: enc = 3;
      4'b01??: enc = 2;
      4'b001?: enc = 1;
      default: enc = 0;
    endcase
    $display("%0d %0t", enc, $time);
  end
endmodule"#,
    );
    assert_eq!(out, "3 9 3\n2 4\n");
}

#[test]
fn gates_and_partselects() {
    let out = stdout(
        r#"module t;
  reg [7:0] v; wire n, o; reg [15:0] w;
  nand g1(n, v[0], v[1]);
  or (o, v[2], v[3], v[4]);
  initial begin
    v = 8'b0000_0011; w = 16'hABCD;
    #1 $display("%b %b %h %h %h", n, o, w[15:8], w[3 +: 4], w[11 -: 4]);
    w[7:4] = 4'h0;
    {v[1:0], v[7:6]} = 4'b1001;
    $display("%h %b", w, v);
  end
endmodule"#,
    );
    assert_eq!(out, "0 0 ab 9 b\nab0d 01000010\n");
}

#[test]
fn monitor_and_strobe() {
    let out = stdout(
        r#"module t;
  reg [1:0] a;
  initial begin
    $monitor("a=%0d", a);
    a = 0; #1 a = 1; #1 a = 1; #1 a = 2;
    $strobe("s=%0d", a); a = 3;
  end
endmodule"#,
    );
    assert_eq!(out, "a=0\na=1\ns=3\na=3\n");
}

#[test]
fn fatal_sets_exit_code() {
    let (out, _, code) = run("module t; initial $fatal(1, \"boom %0d\", 7); endmodule");
    assert!(out.starts_with("FATAL: t.v:1: boom 7"), "{out}");
    assert_eq!(code, 1);
}

#[test]
fn finish_reports_on_stderr() {
    let (out, err, code) = run("module t; initial begin #3 $finish; end endmodule");
    assert_eq!(out, "");
    assert!(err.contains("$finish called at 3"), "{err}");
    assert_eq!(code, 0);
}

#[test]
fn wait_and_named_events_through_while() {
    let out = stdout(
        r#"module t;
  reg done = 0; integer n = 0;
  initial begin wait (done) $display("done at %0t n=%0d", $time, n); end
  initial begin
    while (n < 5) begin #2 n = n + 1; end
    done = 1;
  end
endmodule"#,
    );
    assert_eq!(out, "done at 10 n=5\n");
}

#[test]
fn zero_delay_loop_is_detected() {
    let d = compile_sources(
        &[(
            "t.v".into(),
            "module t; reg a = 0; initial forever a = ~a; endmodule".into(),
        )],
        None,
    )
    .unwrap();
    let mut sim = minisim::Sim::new(
        &d,
        minisim::SimOptions {
            max_time: None,
            step_limit: 10_000,
        },
    );
    let r = sim.run(&mut std::io::sink(), &mut std::io::sink());
    assert!(matches!(r, Err(minisim::SimError::ZeroDelayLoop { .. })));
}

#[test]
fn compile_errors() {
    assert!(compile_err("module t; initial x = 1; endmodule").contains("Unable to bind"));
    assert!(compile_err("module t; foo u(); endmodule").contains("unknown module type"));
    assert!(compile_err("module t;\n  wire a\nendmodule").starts_with("t.v:2: syntax error"));
    assert!(compile_err("module t; reg [99:0] a; endmodule").contains("64"));
    assert!(compile_err("module t; always x = 1; reg x; endmodule").contains("always"));
}

#[test]
fn non_ansi_ports_and_implicit_nets() {
    let out = stdout(
        r#"module inv(a, y);
  input a; output y;
  assign y = !a;
endmodule
module t;
  reg a;
  inv u1(a, mid);
  inv u2(.a(mid), .y(out));
  initial begin a = 0; #1 $display("%b %b", mid, out); a = 1; #1 $display("%b %b", mid, out); end
endmodule"#,
    );
    assert_eq!(out, "1 0\n0 1\n");
}

#[test]
fn defines_and_localparams() {
    let out = stdout(
        r#"`define WIDTH 6
`timescale 1ns/1ps
module t;
  localparam MAXV = (1 << `WIDTH) - 1;
  reg [`WIDTH-1:0] r;
  initial begin r = MAXV; $display("%0d %0d", r, $clog2(MAXV + 1)); end
endmodule"#,
    );
    assert_eq!(out, "63 6\n");
}

#[test]
fn random_is_deterministic() {
    let src = "module t; integer i; initial for (i = 0; i < 3; i = i + 1) $display(\"%0d\", $urandom % 100); endmodule";
    assert_eq!(stdout(src), stdout(src));
}
