/** Wire shapes exchanged with the DPI server. Field names match the wire. */

export interface WireObservation {
  SSID: string;
  MAC: string;
  RSSI: number;
  kind: "wifi" | "bluetooth";
  ts: number;
}

export interface SnippetPayload {
  id: string;
  title: string;
  html: string;
}

export interface EvaluateResponse {
  fired: string[];
  snippets: SnippetPayload[];
}

export interface RuleDiagnostic {
  error: string;
  line?: number;
  column?: number;
}

export interface VenueAp {
  ssid: string;
  mac: string;
  kind: string;
  x: number;
  y: number;
  floor: number;
  tx_ref_dbm: number;
}

export interface VenueInfo {
  name: string;
  params: Record<string, number>;
  aps: VenueAp[];
}

export interface DevicePoint {
  x: number;
  y: number;
  floor: number;
}
